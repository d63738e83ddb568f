#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "icad/kernels.hpp"
#include "icad/mask.hpp"

// Reverse-mode automatic differentiation over dense tensors. A TensorT is a
// handle to a graph node; operations record their parents and a closure that
// pushes gradients backwards. backward() on a scalar runs the closures in
// reverse topological order. Gradients of leaf tensors accumulate across
// calls; interior gradients are rebuilt every call.
//
// The element type is a template parameter: the production path runs float,
// the numeric tests run the same code in double.

namespace icad {

template <typename T>
struct TensorNode {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until first needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;

  int64_t numel() const { return int64_t(values.size()); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
};

namespace detail {

inline int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape must have positive extents");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace detail

template <typename T>
class TensorT {
public:
  TensorT() = default;
  explicit TensorT(std::shared_ptr<TensorNode<T>> n) : node(std::move(n)) {}

  static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static TensorT full(std::vector<int> shape, T value, bool requires_grad = false) {
    auto n = std::make_shared<TensorNode<T>>();
    n->values.assign(size_t(detail::shape_numel(shape)), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  static TensorT from_values(std::vector<int> shape, std::vector<T> values,
                             bool requires_grad = false) {
    if (detail::shape_numel(shape) != int64_t(values.size()))
      throw std::invalid_argument("from_values: element count does not match shape");
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  bool defined() const { return node != nullptr; }
  const std::vector<int>& shape() const { return checked().shape; }
  int64_t numel() const { return checked().numel(); }
  bool requires_grad() const { return checked().requires_grad; }

  int dim(int i) const {
    const auto& s = shape();
    if (i < 0 || size_t(i) >= s.size()) throw std::invalid_argument("dim: axis out of range");
    return s[size_t(i)];
  }

  std::span<T> values() { return {checked().values.data(), checked().values.size()}; }
  std::span<const T> values() const { return {checked().values.data(), checked().values.size()}; }

  // Gradient buffer; empty span if no gradient has been accumulated yet.
  std::span<T> grad() { return {checked().grad.data(), checked().grad.size()}; }
  std::span<const T> grad() const { return {checked().grad.data(), checked().grad.size()}; }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor is not a scalar");
    return checked().values[0];
  }

  void zero_grad() { checked().grad.assign(checked().values.size(), T(0)); }

  // Reverse-mode sweep from a scalar. Leaf gradients accumulate; calling
  // backward twice on the same graph adds the gradient twice.
  void backward() {
    TensorNode<T>& root = checked();
    if (root.numel() != 1) throw std::invalid_argument("backward: root must be a scalar");

    // Postorder DFS: every node appears after all of its parents.
    std::vector<TensorNode<T>*> order;
    std::unordered_set<const TensorNode<T>*> seen;
    struct Frame {
      TensorNode<T>* n;
      size_t next = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({&root});
    seen.insert(&root);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < f.n->parents.size()) {
        TensorNode<T>* p = f.n->parents[f.next++].get();
        if (seen.insert(p).second) stack.push_back({p});
      } else {
        order.push_back(f.n);
        stack.pop_back();
      }
    }

    // Interior gradients start fresh each sweep; leaves keep accumulating.
    for (TensorNode<T>* n : order)
      if (!n->parents.empty()) n->grad.assign(n->values.size(), T(0));

    root.ensure_grad();
    root.grad[0] += T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop();
  }

  std::shared_ptr<TensorNode<T>> node;

private:
  TensorNode<T>& checked() const {
    if (!node) throw std::logic_error("operation on an undefined tensor");
    return *node;
  }
};

namespace detail {

template <typename T>
TensorT<T> make_op(std::vector<int> shape,
                   std::vector<std::shared_ptr<TensorNode<T>>> parents) {
  auto n = std::make_shared<TensorNode<T>>();
  n->values.resize(size_t(shape_numel(shape)));
  n->shape = std::move(shape);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return TensorT<T>(std::move(n));
}

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto out = detail::make_op<T>(a.shape(), {a.node, b.node});
  const int64_t n = out.numel();
  const T* av = a.node->values.data();
  const T* bv = b.node->values.data();
  T* ov = out.node->values.data();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
  if (out.node->requires_grad) {
    auto an = a.node, bn = b.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, bn, self, n] {
      for (auto& pn : {an, bn}) {
        if (!pn->requires_grad) continue;
        pn->ensure_grad();
        for (int64_t i = 0; i < n; ++i) pn->grad[size_t(i)] += self->grad[size_t(i)];
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto out = detail::make_op<T>(a.shape(), {a.node, b.node});
  const int64_t n = out.numel();
  const T* av = a.node->values.data();
  const T* bv = b.node->values.data();
  T* ov = out.node->values.data();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i];
  if (out.node->requires_grad) {
    auto an = a.node, bn = b.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, bn, self, n] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (int64_t i = 0; i < n; ++i) an->grad[size_t(i)] += self->grad[size_t(i)];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t i = 0; i < n; ++i) bn->grad[size_t(i)] -= self->grad[size_t(i)];
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto out = detail::make_op<T>(a.shape(), {a.node, b.node});
  const int64_t n = out.numel();
  const T* av = a.node->values.data();
  const T* bv = b.node->values.data();
  T* ov = out.node->values.data();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i];
  if (out.node->requires_grad) {
    auto an = a.node, bn = b.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, bn, self, n] {
      if (an->requires_grad) {
        an->ensure_grad();
        for (int64_t i = 0; i < n; ++i)
          an->grad[size_t(i)] += self->grad[size_t(i)] * bn->values[size_t(i)];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t i = 0; i < n; ++i)
          bn->grad[size_t(i)] += self->grad[size_t(i)] * an->values[size_t(i)];
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  auto out = detail::make_op<T>(a.shape(), {a.node});
  const int64_t n = out.numel();
  const T* av = a.node->values.data();
  T* ov = out.node->values.data();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] * s;
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self, s, n] {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) an->grad[size_t(i)] += self->grad[size_t(i)] * s;
    };
  }
  return out;
}

// |x|, with subgradient 0 at x == 0.
template <typename T>
TensorT<T> abs(const TensorT<T>& a) {
  auto out = detail::make_op<T>(a.shape(), {a.node});
  const int64_t n = out.numel();
  const T* av = a.node->values.data();
  T* ov = out.node->values.data();
  for (int64_t i = 0; i < n; ++i) ov[i] = av[i] < T(0) ? -av[i] : av[i];
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self, n] {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const T x = an->values[size_t(i)];
        if (x > T(0))
          an->grad[size_t(i)] += self->grad[size_t(i)];
        else if (x < T(0))
          an->grad[size_t(i)] -= self->grad[size_t(i)];
      }
    };
  }
  return out;
}

template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
  auto out = detail::make_op<T>({1}, {a.node});
  const int64_t n = a.numel();
  const T* av = a.node->values.data();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += av[i];
  out.node->values[0] = acc;
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self, n] {
      an->ensure_grad();
      const T g = self->grad[0];
      for (int64_t i = 0; i < n; ++i) an->grad[size_t(i)] += g;
    };
  }
  return out;
}

template <typename T>
TensorT<T> mean(const TensorT<T>& a) {
  auto out = detail::make_op<T>({1}, {a.node});
  const int64_t n = a.numel();
  const T* av = a.node->values.data();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += av[i];
  out.node->values[0] = acc / T(n);
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self, n] {
      an->ensure_grad();
      const T g = self->grad[0] / T(n);
      for (int64_t i = 0; i < n; ++i) an->grad[size_t(i)] += g;
    };
  }
  return out;
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, std::vector<int> new_shape) {
  if (detail::shape_numel(new_shape) != a.numel())
    throw std::invalid_argument("reshape: element count mismatch for " +
                                detail::shape_str(new_shape));
  auto out = detail::make_op<T>(std::move(new_shape), {a.node});
  out.node->values = a.node->values;
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self] {
      an->ensure_grad();
      for (size_t i = 0; i < self->grad.size(); ++i) an->grad[i] += self->grad[i];
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> elu(const TensorT<T>& a) {
  auto out = detail::make_op<T>(a.shape(), {a.node});
  kernels::par::elu_forward(a.node->values.data(), out.node->values.data(), out.numel());
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self] {
      an->ensure_grad();
      kernels::par::elu_backward(an->values.data(), self->grad.data(), an->grad.data(),
                                 an->numel());
    };
  }
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  auto out = detail::make_op<T>(a.shape(), {a.node});
  kernels::par::relu_forward(a.node->values.data(), out.node->values.data(), out.numel());
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self] {
      an->ensure_grad();
      kernels::par::relu_backward(an->values.data(), self->grad.data(), an->grad.data(),
                                  an->numel());
    };
  }
  return out;
}

// Clamp to [lo, hi]. The gradient passes through strictly inside the interval
// and is zero at the boundaries and outside.
template <typename T>
TensorT<T> clip(const TensorT<T>& a, T lo, T hi) {
  if (!(lo < hi)) throw std::invalid_argument("clip: lo must be less than hi");
  auto out = detail::make_op<T>(a.shape(), {a.node});
  kernels::par::clip_forward(a.node->values.data(), out.node->values.data(), out.numel(),
                             lo, hi);
  if (out.node->requires_grad) {
    auto an = a.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [an, self, lo, hi] {
      an->ensure_grad();
      kernels::par::clip_backward(an->values.data(), self->grad.data(), an->grad.data(),
                                  an->numel(), lo, hi);
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution with mirror padding
// ---------------------------------------------------------------------------

// 2-D convolution, NCHW. The input is mirror-padded by dilation*(k-1)/2 on
// each side so that with stride 1 the output keeps the input resolution; with
// stride s the output is ceil(h/s) x ceil(w/s). Requires odd k and spatial
// extents of at least pad+1 (the reflection cannot reach further than that).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  int dilation, int stride) {
  if (x.shape().size() != 4) throw std::invalid_argument("conv2d: input must be 4-D NCHW");
  if (w.shape().size() != 4) throw std::invalid_argument("conv2d: weight must be 4-D");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wdt = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin)
    throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.dim(1)) +
                                " input channels, got " + std::to_string(cin));
  if (w.dim(3) != k || k % 2 == 0 || k <= 0)
    throw std::invalid_argument("conv2d: kernel must be square with odd size");
  if (b.shape() != std::vector<int>{cout})
    throw std::invalid_argument("conv2d: bias must have shape [out_channels]");
  if (dilation < 1 || stride < 1)
    throw std::invalid_argument("conv2d: dilation and stride must be at least 1");

  const int pad = dilation * (k - 1) / 2;
  if (h < pad + 1 || wdt < pad + 1)
    throw std::invalid_argument("conv2d: input " + std::to_string(h) + "x" +
                                std::to_string(wdt) + " too small for mirror padding of " +
                                std::to_string(pad));
  const int hp = h + 2 * pad, wp = wdt + 2 * pad;
  const int ho = (h + stride - 1) / stride, wo = (wdt + stride - 1) / stride;

  auto out = detail::make_op<T>({n, cout, ho, wo}, {x.node, w.node, b.node});
  std::vector<T> xpad(size_t(n) * cin * hp * wp);
  kernels::par::mirror_pad(x.node->values.data(), xpad.data(), n, cin, h, wdt, pad);
  kernels::par::conv2d_forward(xpad.data(), w.node->values.data(), b.node->values.data(),
                               out.node->values.data(), n, cin, hp, wp, cout, k, dilation,
                               stride, ho, wo);

  if (out.node->requires_grad) {
    auto xn = x.node, wn = w.node, bn = b.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [xn, wn, bn, self, n, cin, h, wdt, cout, k, dilation, stride, pad,
                          hp, wp, ho, wo] {
      // The padded input is cheap to rebuild, so it is not kept alive.
      std::vector<T> xpad2;
      if (wn->requires_grad || bn->requires_grad) {
        xpad2.resize(size_t(n) * cin * hp * wp);
        kernels::par::mirror_pad(xn->values.data(), xpad2.data(), n, cin, h, wdt, pad);
        std::vector<T> wscratch, bscratch;
        T* gw;
        T* gb;
        if (wn->requires_grad) {
          wn->ensure_grad();
          gw = wn->grad.data();
        } else {
          wscratch.assign(wn->values.size(), T(0));
          gw = wscratch.data();
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          gb = bn->grad.data();
        } else {
          bscratch.assign(bn->values.size(), T(0));
          gb = bscratch.data();
        }
        kernels::par::conv2d_grad_params(self->grad.data(), xpad2.data(), gw, gb, n, cin,
                                         hp, wp, cout, k, dilation, stride, ho, wo);
      }
      if (xn->requires_grad) {
        std::vector<T> gxpad(size_t(n) * cin * hp * wp);
        kernels::par::conv2d_grad_input(self->grad.data(), wn->values.data(), gxpad.data(),
                                        n, cin, hp, wp, cout, k, dilation, stride, ho, wo);
        xn->ensure_grad();
        kernels::par::mirror_fold(gxpad.data(), xn->grad.data(), n, cin, h, wdt, pad);
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bilinear resize
// ---------------------------------------------------------------------------

// Bilinear interpolation with half-pixel sample centers, NCHW.
template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& x, int oh, int ow) {
  if (x.shape().size() != 4) throw std::invalid_argument("bilinear_resize: input must be 4-D");
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("bilinear_resize: bad target size");
  const int n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  auto out = detail::make_op<T>({n, c, oh, ow}, {x.node});
  kernels::par::bilinear_resize(x.node->values.data(), out.node->values.data(), n * c, ih,
                                iw, oh, ow);
  if (out.node->requires_grad) {
    auto xn = x.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [xn, self, n, c, ih, iw, oh, ow] {
      xn->ensure_grad();
      kernels::par::bilinear_resize_grad(self->grad.data(), xn->grad.data(), n * c, ih,
                                         iw, oh, ow);
    };
  }
  return out;
}

template <typename T>
TensorT<T> bilinear_upscale_2x(const TensorT<T>& x) {
  if (x.shape().size() != 4)
    throw std::invalid_argument("bilinear_upscale_2x: input must be 4-D");
  return bilinear_resize(x, 2 * x.dim(2), 2 * x.dim(3));
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

// y = x W^T + b with x [n, fin], W [fout, fin], b [fout].
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.shape().size() != 2) throw std::invalid_argument("linear: input must be 2-D");
  if (w.shape().size() != 2) throw std::invalid_argument("linear: weight must be 2-D");
  const int n = x.dim(0), fin = x.dim(1), fout = w.dim(0);
  if (w.dim(1) != fin)
    throw std::invalid_argument("linear: weight expects " + std::to_string(w.dim(1)) +
                                " features, got " + std::to_string(fin));
  if (b.shape() != std::vector<int>{fout})
    throw std::invalid_argument("linear: bias must have shape [out_features]");
  auto out = detail::make_op<T>({n, fout}, {x.node, w.node, b.node});
  kernels::par::linear_forward(x.node->values.data(), w.node->values.data(),
                               b.node->values.data(), out.node->values.data(), n, fin,
                               fout);
  if (out.node->requires_grad) {
    auto xn = x.node, wn = w.node, bn = b.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [xn, wn, bn, self, n, fin, fout] {
      if (wn->requires_grad || bn->requires_grad) {
        std::vector<T> wscratch, bscratch;
        T* gw;
        T* gb;
        if (wn->requires_grad) {
          wn->ensure_grad();
          gw = wn->grad.data();
        } else {
          wscratch.assign(wn->values.size(), T(0));
          gw = wscratch.data();
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          gb = bn->grad.data();
        } else {
          bscratch.assign(bn->values.size(), T(0));
          gb = bscratch.data();
        }
        kernels::par::linear_grad_params(self->grad.data(), xn->values.data(), gw, gb, n,
                                         fin, fout);
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        kernels::par::linear_grad_input(self->grad.data(), wn->values.data(),
                                        xn->grad.data(), n, fin, fout);
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Weighted L1 reconstruction loss for the inpainting task. Per patch:
//
//   (lambda * |hole residual|_1 + (1 - lambda) * |surround residual|_1) / P^2
//
// where the hole is the centered square of the mask spec, and the result is
// averaged over the batch. Accumulation runs in double regardless of T.
template <typename T>
TensorT<T> masked_l1_loss(const TensorT<T>& target, const TensorT<T>& recon,
                          const MaskSpec& mask, T lambda) {
  mask.validate();
  detail::check_same_shape(target, recon, "masked_l1_loss");
  if (target.shape().size() != 4 || target.dim(1) != 1)
    throw std::invalid_argument("masked_l1_loss: expected [batch, 1, patch, patch]");
  if (target.dim(2) != mask.patch || target.dim(3) != mask.patch)
    throw std::invalid_argument("masked_l1_loss: tensor patch size does not match mask");
  if (!(lambda >= T(0) && lambda <= T(1)))
    throw std::invalid_argument("masked_l1_loss: lambda must lie in [0, 1]");

  const int batch = target.dim(0);
  const int p = mask.patch;
  const int h0 = mask.hole_start(), h1 = mask.hole_end();
  const int64_t per_patch = int64_t(p) * p;

  auto out = detail::make_op<T>({1}, {target.node, recon.node});
  const T* xv = target.node->values.data();
  const T* fv = recon.node->values.data();
  double total = 0.0;
  for (int bi = 0; bi < batch; ++bi) {
    const T* xp = xv + size_t(bi) * per_patch;
    const T* fp = fv + size_t(bi) * per_patch;
    double hole_sum = 0.0, outer_sum = 0.0;
    for (int y = 0; y < p; ++y) {
      const bool row_in = y >= h0 && y < h1;
      for (int x = 0; x < p; ++x) {
        const double d = std::fabs(double(xp[size_t(y) * p + x]) - double(fp[size_t(y) * p + x]));
        if (row_in && x >= h0 && x < h1)
          hole_sum += d;
        else
          outer_sum += d;
      }
    }
    total += (double(lambda) * hole_sum + (1.0 - double(lambda)) * outer_sum) / double(per_patch);
  }
  out.node->values[0] = T(total / double(batch));

  if (out.node->requires_grad) {
    auto xn = target.node, fn = recon.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [xn, fn, self, mask, lambda, batch, p, h0, h1, per_patch] {
      const T g = self->grad[0];
      const T norm = T(1) / (T(per_patch) * T(batch));
      const T* xv2 = xn->values.data();
      const T* fv2 = fn->values.data();
      if (xn->requires_grad) xn->ensure_grad();
      if (fn->requires_grad) fn->ensure_grad();
      for (int bi = 0; bi < batch; ++bi) {
        const size_t base = size_t(bi) * size_t(per_patch);
        for (int y = 0; y < p; ++y) {
          const bool row_in = y >= h0 && y < h1;
          for (int x = 0; x < p; ++x) {
            const size_t i = base + size_t(y) * p + x;
            const T d = xv2[i] - fv2[i];
            if (d == T(0)) continue;
            const T wgt = (row_in && x >= h0 && x < h1) ? lambda : (T(1) - lambda);
            const T s = (d > T(0) ? T(1) : T(-1)) * wgt * norm * g;
            if (xn->requires_grad) xn->grad[i] += s;
            if (fn->requires_grad) fn->grad[i] -= s;
          }
        }
      }
    };
  }
  return out;
}

// Plain mean absolute error over all elements; used by the autoencoder.
template <typename T>
TensorT<T> l1_loss(const TensorT<T>& target, const TensorT<T>& recon) {
  detail::check_same_shape(target, recon, "l1_loss");
  auto out = detail::make_op<T>({1}, {target.node, recon.node});
  const int64_t n = target.numel();
  const T* xv = target.node->values.data();
  const T* fv = recon.node->values.data();
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) total += std::fabs(double(xv[i]) - double(fv[i]));
  out.node->values[0] = T(total / double(n));
  if (out.node->requires_grad) {
    auto xn = target.node, fn = recon.node;
    TensorNode<T>* self = out.node.get();
    out.node->backprop = [xn, fn, self, n] {
      const T g = self->grad[0] / T(n);
      if (xn->requires_grad) xn->ensure_grad();
      if (fn->requires_grad) fn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        const T d = xn->values[size_t(i)] - fn->values[size_t(i)];
        if (d == T(0)) continue;
        const T s = (d > T(0) ? g : -g);
        if (xn->requires_grad) xn->grad[size_t(i)] += s;
        if (fn->requires_grad) fn->grad[size_t(i)] -= s;
      }
    };
  }
  return out;
}

using Tensor = TensorT<float>;

}  // namespace icad
