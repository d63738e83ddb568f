#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

// Low-level numeric kernels, NCHW row-major throughout.
//
// Every kernel exists twice: icad::kernels::serial is a deliberately naive
// reference (plain nested loops, one accumulator per output value) and
// icad::kernels::par is the production variant (OpenMP over disjoint output
// slices, axpy/dot-shaped inner loops that the compiler can vectorize).
//
// The two variants are kept bitwise-identical on purpose: each output element
// sees the same sequence of fused multiply-adds in the same order in both, and
// parallelism only ever splits work at boundaries where one thread owns an
// output slice outright. Tests compare them byte for byte, which also makes
// results independent of the thread count.

namespace icad::kernels {

// Reflect an out-of-range coordinate back into [0, n) without repeating the
// edge sample (mirror padding). Valid for i in [-(n-1), 2n-2].
inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

namespace detail {

template <typename T>
inline void mirror_pad_plane(const T* in, T* out, int h, int w, int pad) {
  const int wp = w + 2 * pad;
  for (int y = 0; y < h + 2 * pad; ++y) {
    const T* src = in + size_t(reflect_index(y - pad, h)) * w;
    T* dst = out + size_t(y) * wp;
    for (int x = 0; x < pad; ++x) dst[x] = src[pad - x];
    std::memcpy(dst + pad, src, sizeof(T) * size_t(w));
    for (int x = 0; x < pad; ++x) dst[pad + w + x] = src[w - 2 - x];
  }
}

template <typename T>
inline void mirror_fold_plane(const T* gpad, T* gin, int h, int w, int pad) {
  const int wp = w + 2 * pad;
  for (int y = 0; y < h + 2 * pad; ++y) {
    const T* src = gpad + size_t(y) * wp;
    T* dst = gin + size_t(reflect_index(y - pad, h)) * w;
    for (int x = 0; x < wp; ++x) dst[reflect_index(x - pad, w)] += src[x];
  }
}

// One (item, out-channel) output plane. Accumulates directly into the output
// row buffer: per pixel the order is bias, then (ci, kh, kw) ascending.
template <typename T>
inline void conv_forward_plane(const T* xpad, const T* wgt, const T* bias, T* out_plane,
                               int cin, int hp, int wp, int co, int k, int dil, int stride,
                               int ho, int wo) {
  const T b = bias ? bias[co] : T(0);
  for (int64_t i = 0; i < int64_t(ho) * wo; ++i) out_plane[i] = b;
  for (int ci = 0; ci < cin; ++ci) {
    const T* xc = xpad + size_t(ci) * hp * wp;
    const T* wc = wgt + (size_t(co) * cin + ci) * k * k;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const T wv = wc[kh * k + kw];
        const T* xoff = xc + size_t(kh) * dil * wp + size_t(kw) * dil;
        if (stride == 1) {
          for (int oh = 0; oh < ho; ++oh) {
            const T* xr = xoff + size_t(oh) * wp;
            T* orow = out_plane + size_t(oh) * wo;
            for (int ow = 0; ow < wo; ++ow) orow[ow] += wv * xr[ow];
          }
        } else {
          for (int oh = 0; oh < ho; ++oh) {
            const T* xr = xoff + size_t(oh) * stride * wp;
            T* orow = out_plane + size_t(oh) * wo;
            for (int ow = 0; ow < wo; ++ow) orow[ow] += wv * xr[size_t(ow) * stride];
          }
        }
      }
    }
  }
}

// Gradient wrt one (item, in-channel) padded input plane (must be zeroed by
// the caller). Per input pixel the order is (co, kh, kw, row scan) ascending.
template <typename T>
inline void conv_grad_input_plane(const T* gout, const T* wgt, T* gx_plane,
                                  int cout, int cin, int ci, int wp, int k, int dil,
                                  int stride, int ho, int wo) {
  for (int co = 0; co < cout; ++co) {
    const T* gop = gout + size_t(co) * ho * wo;
    const T* wc = wgt + (size_t(co) * cin + ci) * k * k;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const T wv = wc[kh * k + kw];
        T* gxoff = gx_plane + size_t(kh) * dil * wp + size_t(kw) * dil;
        if (stride == 1) {
          for (int oh = 0; oh < ho; ++oh) {
            const T* gr = gop + size_t(oh) * wo;
            T* gx = gxoff + size_t(oh) * wp;
            for (int ow = 0; ow < wo; ++ow) gx[ow] += wv * gr[ow];
          }
        } else {
          for (int oh = 0; oh < ho; ++oh) {
            const T* gr = gop + size_t(oh) * wo;
            T* gx = gxoff + size_t(oh) * stride * wp;
            for (int ow = 0; ow < wo; ++ow) gx[size_t(ow) * stride] += wv * gr[ow];
          }
        }
      }
    }
  }
}

// Deterministic 8-lane dot product: lane j picks up elements j, j+8, ... and
// the lanes are combined in a fixed tree. The lane split lets the compiler
// vectorize the reduction without reassociating anything itself.
template <typename T>
struct Lanes8 {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  T combine() const {
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  }
};

// Gradient wrt the weights and bias of one output channel. One thread owns the
// whole channel, so every reduction below has a fixed order.
template <typename T>
inline void conv_grad_params_channel(const T* xpad_all, const T* gout_all, T* gw, T* gb,
                                     int n, int cin, int hp, int wp, int co, int cout,
                                     int k, int dil, int stride, int ho, int wo) {
  {
    Lanes8<T> lanes;
    for (int ni = 0; ni < n; ++ni) {
      const T* gop = gout_all + (size_t(ni) * cout + co) * ho * wo;
      const int64_t total = int64_t(ho) * wo;
      int64_t i = 0;
      for (; i + 8 <= total; i += 8)
        for (int j = 0; j < 8; ++j) lanes.acc[j] += gop[i + j];
      for (; i < total; ++i) lanes.acc[i & 7] += gop[i];
    }
    *gb += lanes.combine();
  }
  for (int ci = 0; ci < cin; ++ci) {
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        Lanes8<T> lanes;
        for (int ni = 0; ni < n; ++ni) {
          const T* gop = gout_all + (size_t(ni) * cout + co) * ho * wo;
          const T* xc = xpad_all + (size_t(ni) * cin + ci) * hp * wp +
                        size_t(kh) * dil * wp + size_t(kw) * dil;
          for (int oh = 0; oh < ho; ++oh) {
            const T* gr = gop + size_t(oh) * wo;
            const T* xr = xc + size_t(oh) * stride * wp;
            int ow = 0;
            if (stride == 1) {
              for (; ow + 8 <= wo; ow += 8)
                for (int j = 0; j < 8; ++j) lanes.acc[j] += gr[ow + j] * xr[ow + j];
              for (; ow < wo; ++ow) lanes.acc[ow & 7] += gr[ow] * xr[ow];
            } else {
              for (; ow + 8 <= wo; ow += 8)
                for (int j = 0; j < 8; ++j)
                  lanes.acc[j] += gr[ow + j] * xr[size_t(ow + j) * stride];
              for (; ow < wo; ++ow) lanes.acc[ow & 7] += gr[ow] * xr[size_t(ow) * stride];
            }
          }
        }
        gw[(size_t(ci) * k + kh) * k + kw] += lanes.combine();
      }
    }
  }
}

// Sampling taps for one output coordinate of a bilinear resize with half-pixel
// centers (the "align corners false" convention).
struct ResizeTap {
  int i0, i1;
  double f;
};

inline ResizeTap resize_tap(int i, int in_size, int out_size) {
  const double u = (double(i) + 0.5) * (double(in_size) / double(out_size)) - 0.5;
  if (u <= 0.0) return {0, 0, 0.0};
  if (u >= double(in_size - 1)) return {in_size - 1, in_size - 1, 0.0};
  const int i0 = int(u);
  return {i0, i0 + 1, u - double(i0)};
}

template <typename T>
inline void bilinear_plane(const T* in, T* out, int ih, int iw, int oh, int ow,
                           const ResizeTap* ty, const ResizeTap* tx) {
  (void)ih;
  for (int y = 0; y < oh; ++y) {
    const T* r0 = in + size_t(ty[y].i0) * iw;
    const T* r1 = in + size_t(ty[y].i1) * iw;
    const T fy = T(ty[y].f);
    T* orow = out + size_t(y) * ow;
    for (int x = 0; x < ow; ++x) {
      const T fx = T(tx[x].f);
      const T a = r0[tx[x].i0] + fx * (r0[tx[x].i1] - r0[tx[x].i0]);
      const T b = r1[tx[x].i0] + fx * (r1[tx[x].i1] - r1[tx[x].i0]);
      orow[x] = a + fy * (b - a);
    }
  }
}

template <typename T>
inline void bilinear_fold_plane(const T* gout, T* gin, int ih, int iw, int oh, int ow,
                                const ResizeTap* ty, const ResizeTap* tx) {
  (void)ih;
  for (int y = 0; y < oh; ++y) {
    const T fy = T(ty[y].f);
    T* g0 = gin + size_t(ty[y].i0) * iw;
    T* g1 = gin + size_t(ty[y].i1) * iw;
    const T* grow = gout + size_t(y) * ow;
    for (int x = 0; x < ow; ++x) {
      const T fx = T(tx[x].f);
      const T g = grow[x];
      // v = a + fy*(b-a), a = p00 + fx*(p01-p00), b = p10 + fx*(p11-p10)
      const T ga = g - fy * g;
      const T gb = fy * g;
      g0[tx[x].i0] += ga - fx * ga;
      g0[tx[x].i1] += fx * ga;
      g1[tx[x].i0] += gb - fx * gb;
      g1[tx[x].i1] += fx * gb;
    }
  }
}

template <typename T>
inline T elu_one(T x) {
  return x > T(0) ? x : T(std::expm1(x));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Serial reference implementations. Written as directly as possible; used by
// tests as the ground truth the parallel kernels must match bitwise.
// ---------------------------------------------------------------------------
namespace serial {

template <typename T>
void mirror_pad(const T* in, T* out, int n, int c, int h, int w, int pad) {
  for (int p = 0; p < n * c; ++p)
    detail::mirror_pad_plane(in + size_t(p) * h * w,
                             out + size_t(p) * (h + 2 * pad) * (w + 2 * pad), h, w, pad);
}

template <typename T>
void mirror_fold(const T* gpad, T* gin, int n, int c, int h, int w, int pad) {
  for (int p = 0; p < n * c; ++p)
    detail::mirror_fold_plane(gpad + size_t(p) * (h + 2 * pad) * (w + 2 * pad),
                              gin + size_t(p) * h * w, h, w, pad);
}

// Convolution over a pre-padded input. One accumulator per output pixel,
// initialized with the bias; taps visited in (ci, kh, kw) order.
template <typename T>
void conv2d_forward(const T* xpad, const T* wgt, const T* bias, T* out, int n, int cin,
                    int hp, int wp, int cout, int k, int dil, int stride, int ho, int wo) {
  for (int ni = 0; ni < n; ++ni) {
    for (int co = 0; co < cout; ++co) {
      T* out_plane = out + (size_t(ni) * cout + co) * ho * wo;
      for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow) {
          T acc = bias ? bias[co] : T(0);
          for (int ci = 0; ci < cin; ++ci) {
            const T* xc = xpad + (size_t(ni) * cin + ci) * hp * wp;
            const T* wc = wgt + (size_t(co) * cin + ci) * k * k;
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw)
                acc += wc[kh * k + kw] *
                       xc[size_t(oh * stride + kh * dil) * wp + size_t(ow * stride + kw * dil)];
          }
          out_plane[size_t(oh) * wo + ow] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_grad_input(const T* gout, const T* wgt, T* gxpad, int n, int cin, int hp,
                       int wp, int cout, int k, int dil, int stride, int ho, int wo) {
  std::memset(gxpad, 0, sizeof(T) * size_t(n) * cin * hp * wp);
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < cin; ++ci)
      detail::conv_grad_input_plane(gout + size_t(ni) * cout * ho * wo, wgt,
                                    gxpad + (size_t(ni) * cin + ci) * hp * wp, cout, cin,
                                    ci, wp, k, dil, stride, ho, wo);
}

template <typename T>
void conv2d_grad_params(const T* gout, const T* xpad, T* gw, T* gb, int n, int cin,
                        int hp, int wp, int cout, int k, int dil, int stride, int ho,
                        int wo) {
  for (int co = 0; co < cout; ++co)
    detail::conv_grad_params_channel(xpad, gout, gw + size_t(co) * cin * k * k, gb + co,
                                     n, cin, hp, wp, co, cout, k, dil, stride, ho, wo);
}

template <typename T>
void elu_forward(const T* x, T* y, int64_t count) {
  for (int64_t i = 0; i < count; ++i) y[i] = detail::elu_one(x[i]);
}

template <typename T>
void elu_backward(const T* x, const T* gy, T* gx, int64_t count) {
  for (int64_t i = 0; i < count; ++i)
    gx[i] += gy[i] * (x[i] > T(0) ? T(1) : T(std::exp(x[i])));
}

template <typename T>
void relu_forward(const T* x, T* y, int64_t count) {
  for (int64_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* gy, T* gx, int64_t count) {
  for (int64_t i = 0; i < count; ++i) gx[i] += x[i] > T(0) ? gy[i] : T(0);
}

template <typename T>
void clip_forward(const T* x, T* y, int64_t count, T lo, T hi) {
  for (int64_t i = 0; i < count; ++i) y[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

// Pass-through strictly inside (lo, hi); zero outside and at the boundaries.
template <typename T>
void clip_backward(const T* x, const T* gy, T* gx, int64_t count, T lo, T hi) {
  for (int64_t i = 0; i < count; ++i)
    gx[i] += (x[i] > lo && x[i] < hi) ? gy[i] : T(0);
}

template <typename T>
void bilinear_resize(const T* in, T* out, int planes, int ih, int iw, int oh, int ow) {
  std::vector<detail::ResizeTap> ty(oh), tx(ow);
  for (int y = 0; y < oh; ++y) ty[y] = detail::resize_tap(y, ih, oh);
  for (int x = 0; x < ow; ++x) tx[x] = detail::resize_tap(x, iw, ow);
  for (int p = 0; p < planes; ++p)
    detail::bilinear_plane(in + size_t(p) * ih * iw, out + size_t(p) * oh * ow, ih, iw,
                           oh, ow, ty.data(), tx.data());
}

template <typename T>
void bilinear_resize_grad(const T* gout, T* gin, int planes, int ih, int iw, int oh,
                          int ow) {
  std::vector<detail::ResizeTap> ty(oh), tx(ow);
  for (int y = 0; y < oh; ++y) ty[y] = detail::resize_tap(y, ih, oh);
  for (int x = 0; x < ow; ++x) tx[x] = detail::resize_tap(x, iw, ow);
  for (int p = 0; p < planes; ++p)
    detail::bilinear_fold_plane(gout + size_t(p) * oh * ow, gin + size_t(p) * ih * iw,
                                ih, iw, oh, ow, ty.data(), tx.data());
}

// y[b,:] = W x[b,:] + bias, W stored [fout, fin] row-major.
template <typename T>
void linear_forward(const T* x, const T* wgt, const T* bias, T* y, int b, int fin,
                    int fout) {
  for (int bi = 0; bi < b; ++bi) {
    for (int fo = 0; fo < fout; ++fo) {
      detail::Lanes8<T> lanes;
      const T* xr = x + size_t(bi) * fin;
      const T* wr = wgt + size_t(fo) * fin;
      int i = 0;
      for (; i + 8 <= fin; i += 8)
        for (int j = 0; j < 8; ++j) lanes.acc[j] += wr[i + j] * xr[i + j];
      for (; i < fin; ++i) lanes.acc[i & 7] += wr[i] * xr[i];
      y[size_t(bi) * fout + fo] = (bias ? bias[fo] : T(0)) + lanes.combine();
    }
  }
}

template <typename T>
void linear_grad_input(const T* gy, const T* wgt, T* gx, int b, int fin, int fout) {
  for (int bi = 0; bi < b; ++bi) {
    T* gxr = gx + size_t(bi) * fin;
    for (int fo = 0; fo < fout; ++fo) {
      const T g = gy[size_t(bi) * fout + fo];
      const T* wr = wgt + size_t(fo) * fin;
      for (int i = 0; i < fin; ++i) gxr[i] += g * wr[i];
    }
  }
}

template <typename T>
void linear_grad_params(const T* gy, const T* x, T* gw, T* gb, int b, int fin,
                        int fout) {
  for (int fo = 0; fo < fout; ++fo) {
    T* gwr = gw + size_t(fo) * fin;
    T gacc = T(0);
    for (int bi = 0; bi < b; ++bi) {
      const T g = gy[size_t(bi) * fout + fo];
      const T* xr = x + size_t(bi) * fin;
      for (int i = 0; i < fin; ++i) gwr[i] += g * xr[i];
      gacc += g;
    }
    gb[fo] += gacc;
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations. Work is split only across whole output slices
// (planes, channels, rows), so each output value is produced by exactly one
// thread running the same inner code as the serial reference.
// ---------------------------------------------------------------------------
namespace par {

template <typename T>
void mirror_pad(const T* in, T* out, int n, int c, int h, int w, int pad) {
  const int planes = n * c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p)
    detail::mirror_pad_plane(in + size_t(p) * h * w,
                             out + size_t(p) * (h + 2 * pad) * (w + 2 * pad), h, w, pad);
}

template <typename T>
void mirror_fold(const T* gpad, T* gin, int n, int c, int h, int w, int pad) {
  const int planes = n * c;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p)
    detail::mirror_fold_plane(gpad + size_t(p) * (h + 2 * pad) * (w + 2 * pad),
                              gin + size_t(p) * h * w, h, w, pad);
}

template <typename T>
void conv2d_forward(const T* xpad, const T* wgt, const T* bias, T* out, int n, int cin,
                    int hp, int wp, int cout, int k, int dil, int stride, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < cout; ++co)
      detail::conv_forward_plane(xpad + size_t(ni) * cin * hp * wp, wgt, bias,
                                 out + (size_t(ni) * cout + co) * ho * wo, cin, hp, wp,
                                 co, k, dil, stride, ho, wo);
}

template <typename T>
void conv2d_grad_input(const T* gout, const T* wgt, T* gxpad, int n, int cin, int hp,
                       int wp, int cout, int k, int dil, int stride, int ho, int wo) {
  std::memset(gxpad, 0, sizeof(T) * size_t(n) * cin * hp * wp);
#pragma omp parallel for collapse(2) schedule(static)
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < cin; ++ci)
      detail::conv_grad_input_plane(gout + size_t(ni) * cout * ho * wo, wgt,
                                    gxpad + (size_t(ni) * cin + ci) * hp * wp, cout, cin,
                                    ci, wp, k, dil, stride, ho, wo);
}

template <typename T>
void conv2d_grad_params(const T* gout, const T* xpad, T* gw, T* gb, int n, int cin,
                        int hp, int wp, int cout, int k, int dil, int stride, int ho,
                        int wo) {
#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co)
    detail::conv_grad_params_channel(xpad, gout, gw + size_t(co) * cin * k * k, gb + co,
                                     n, cin, hp, wp, co, cout, k, dil, stride, ho, wo);
}

template <typename T>
void elu_forward(const T* x, T* y, int64_t count) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i) y[i] = detail::elu_one(x[i]);
}

template <typename T>
void elu_backward(const T* x, const T* gy, T* gx, int64_t count) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i)
    gx[i] += gy[i] * (x[i] > T(0) ? T(1) : T(std::exp(x[i])));
}

template <typename T>
void relu_forward(const T* x, T* y, int64_t count) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* gy, T* gx, int64_t count) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i) gx[i] += x[i] > T(0) ? gy[i] : T(0);
}

template <typename T>
void clip_forward(const T* x, T* y, int64_t count, T lo, T hi) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i) y[i] = x[i] < lo ? lo : (x[i] > hi ? hi : x[i]);
}

template <typename T>
void clip_backward(const T* x, const T* gy, T* gx, int64_t count, T lo, T hi) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i)
    gx[i] += (x[i] > lo && x[i] < hi) ? gy[i] : T(0);
}

template <typename T>
void bilinear_resize(const T* in, T* out, int planes, int ih, int iw, int oh, int ow) {
  std::vector<detail::ResizeTap> ty(oh), tx(ow);
  for (int y = 0; y < oh; ++y) ty[y] = detail::resize_tap(y, ih, oh);
  for (int x = 0; x < ow; ++x) tx[x] = detail::resize_tap(x, iw, ow);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p)
    detail::bilinear_plane(in + size_t(p) * ih * iw, out + size_t(p) * oh * ow, ih, iw,
                           oh, ow, ty.data(), tx.data());
}

template <typename T>
void bilinear_resize_grad(const T* gout, T* gin, int planes, int ih, int iw, int oh,
                          int ow) {
  std::vector<detail::ResizeTap> ty(oh), tx(ow);
  for (int y = 0; y < oh; ++y) ty[y] = detail::resize_tap(y, ih, oh);
  for (int x = 0; x < ow; ++x) tx[x] = detail::resize_tap(x, iw, ow);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p)
    detail::bilinear_fold_plane(gout + size_t(p) * oh * ow, gin + size_t(p) * ih * iw,
                                ih, iw, oh, ow, ty.data(), tx.data());
}

template <typename T>
void linear_forward(const T* x, const T* wgt, const T* bias, T* y, int b, int fin,
                    int fout) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int bi = 0; bi < b; ++bi) {
    for (int fo = 0; fo < fout; ++fo) {
      detail::Lanes8<T> lanes;
      const T* xr = x + size_t(bi) * fin;
      const T* wr = wgt + size_t(fo) * fin;
      int i = 0;
      for (; i + 8 <= fin; i += 8)
        for (int j = 0; j < 8; ++j) lanes.acc[j] += wr[i + j] * xr[i + j];
      for (; i < fin; ++i) lanes.acc[i & 7] += wr[i] * xr[i];
      y[size_t(bi) * fout + fo] = (bias ? bias[fo] : T(0)) + lanes.combine();
    }
  }
}

template <typename T>
void linear_grad_input(const T* gy, const T* wgt, T* gx, int b, int fin, int fout) {
#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < b; ++bi) {
    T* gxr = gx + size_t(bi) * fin;
    for (int fo = 0; fo < fout; ++fo) {
      const T g = gy[size_t(bi) * fout + fo];
      const T* wr = wgt + size_t(fo) * fin;
      for (int i = 0; i < fin; ++i) gxr[i] += g * wr[i];
    }
  }
}

template <typename T>
void linear_grad_params(const T* gy, const T* x, T* gw, T* gb, int b, int fin,
                        int fout) {
#pragma omp parallel for schedule(static)
  for (int fo = 0; fo < fout; ++fo) {
    T* gwr = gw + size_t(fo) * fin;
    T gacc = T(0);
    for (int bi = 0; bi < b; ++bi) {
      const T g = gy[size_t(bi) * fout + fo];
      const T* xr = x + size_t(bi) * fin;
      for (int i = 0; i < fin; ++i) gwr[i] += g * xr[i];
      gacc += g;
    }
    gb[fo] += gacc;
  }
}

}  // namespace par

}  // namespace icad::kernels
