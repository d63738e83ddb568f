#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "icad/rng.hpp"
#include "icad/tensor.hpp"

// Shared helpers for the test binaries: finite-difference gradient checking
// and from-the-definition oracles that deliberately do not reuse the library
// kernels.

namespace icad_test {

inline std::vector<float> random_vec(icad::Rng& rng, size_t n, double lo = -1.0,
                                     double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(lo, hi));
  return v;
}

inline std::vector<double> random_vec_d(icad::Rng& rng, size_t n, double lo = -1.0,
                                        double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Central finite differences against the analytic gradient. make_loss must
// rebuild the scalar loss from the current values of the leaf tensors. When
// max_per_leaf is positive, only that many randomly chosen coordinates of each
// leaf are probed (the analytic sweep still covers everything).
inline double gradcheck_max_rel_err(const std::vector<icad::TensorT<double>*>& leaves,
                                    const std::function<icad::TensorT<double>()>& make_loss,
                                    double h = 1e-4, int max_per_leaf = -1,
                                    uint64_t pick_seed = 7) {
  for (auto* l : leaves) l->zero_grad();
  auto loss = make_loss();
  loss.backward();

  icad::Rng pick(pick_seed);
  double worst = 0.0;
  for (auto* l : leaves) {
    std::vector<double> analytic(l->grad().begin(), l->grad().end());
    const int64_t n = l->numel();
    std::vector<int64_t> idx;
    if (max_per_leaf <= 0 || n <= max_per_leaf) {
      idx.resize(size_t(n));
      for (int64_t i = 0; i < n; ++i) idx[size_t(i)] = i;
    } else {
      for (int i = 0; i < max_per_leaf; ++i) idx.push_back(pick.uniform_int(n));
    }
    for (int64_t i : idx) {
      auto vals = l->values();
      const double orig = vals[size_t(i)];
      vals[size_t(i)] = orig + h;
      const double lp = make_loss().item();
      vals[size_t(i)] = orig - h;
      const double lm = make_loss().item();
      vals[size_t(i)] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double a = analytic[size_t(i)];
      const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-4});
      worst = std::max(worst, std::fabs(a - fd) / denom);
    }
  }
  return worst;
}

// Mirror reflection without edge repetition, written independently of the
// library helper.
inline int mirror(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

// Dilated, strided convolution with mirror padding, straight from the
// definition: out(co, oy, ox) = b[co] + sum over (ci, ky, kx) of
// w(co,ci,ky,kx) * x(ci, mirror(oy*s + (ky - r)*d), mirror(ox*s + (kx - r)*d))
// where r = (k-1)/2 and coordinates are taken relative to the unpadded image.
template <typename T>
std::vector<T> conv_oracle(const std::vector<T>& x, int n, int cin, int h, int w,
                           const std::vector<T>& wgt, int cout, int k,
                           const std::vector<T>& bias, int dil, int stride) {
  const int r = (k - 1) / 2;
  const int ho = (h + stride - 1) / stride, wo = (w + stride - 1) / stride;
  std::vector<T> out(size_t(n) * cout * ho * wo);
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < cout; ++co)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          T acc = bias.empty() ? T(0) : bias[size_t(co)];
          for (int ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = mirror(oy * stride + (ky - r) * dil, h);
                const int ix = mirror(ox * stride + (kx - r) * dil, w);
                acc += wgt[((size_t(co) * cin + ci) * k + ky) * k + kx] *
                       x[((size_t(ni) * cin + ci) * h + iy) * w + ix];
              }
          out[((size_t(ni) * cout + co) * ho + oy) * wo + ox] = acc;
        }
  return out;
}

// Bilinear sampling with half-pixel centers, from the definition.
template <typename T>
std::vector<T> resize_oracle(const std::vector<T>& in, int planes, int ih, int iw, int oh,
                             int ow) {
  std::vector<T> out(size_t(planes) * oh * ow);
  auto sample = [&](const T* plane, double uy, double ux) {
    const auto clamp = [](double u, int n) {
      if (u < 0) return std::pair<int, double>{0, 0.0};
      if (u >= n - 1) return std::pair<int, double>{n - 1, 0.0};
      const int i = int(u);
      return std::pair<int, double>{i, u - i};
    };
    auto [y0, fy] = clamp(uy, ih);
    auto [x0, fx] = clamp(ux, iw);
    const int y1 = std::min(y0 + 1, ih - 1), x1 = std::min(x0 + 1, iw - 1);
    const double p00 = plane[size_t(y0) * iw + x0], p01 = plane[size_t(y0) * iw + x1];
    const double p10 = plane[size_t(y1) * iw + x0], p11 = plane[size_t(y1) * iw + x1];
    const double top = p00 * (1 - fx) + p01 * fx;
    const double bot = p10 * (1 - fx) + p11 * fx;
    return top * (1 - fy) + bot * fy;
  };
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double uy = (y + 0.5) * (double(ih) / oh) - 0.5;
        const double ux = (x + 0.5) * (double(iw) / ow) - 0.5;
        out[(size_t(p) * oh + y) * ow + x] = T(sample(in.data() + size_t(p) * ih * iw, uy, ux));
      }
  return out;
}

// The (kernel, dilation, stride) combinations used by the completion network.
inline std::vector<std::array<int, 3>> conv_shapes_under_test() {
  return {{5, 1, 1}, {3, 1, 1}, {3, 1, 2}, {3, 2, 1}, {3, 4, 1}, {3, 8, 1}, {3, 16, 1}};
}

// Smallest square input a mirror-padded conv accepts: pad + 1.
inline int min_input_for(int k, int dil) { return dil * (k - 1) / 2 + 1; }

}  // namespace icad_test
