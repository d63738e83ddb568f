#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "icad/rng.hpp"
#include "icad/tensor.hpp"

namespace icad {

template <typename T>
struct AdamHyper {
  T alpha = T(0.0002);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// ADAM with bias correction:
//   m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
//   mhat = m/(1-b1^t)           vhat = v/(1-b2^t)
//   theta <- theta - alpha * mhat / (sqrt(vhat) + eps)
// The step counter starts at 0 and t=1 is used for the first correction.
template <typename T>
class AdamT {
public:
  AdamT() = default;

  explicit AdamT(std::vector<TensorT<T>> params, AdamHyper<T> hp = {})
      : params_(std::move(params)), hp_(hp) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), T(0));
      v_.emplace_back(p.numel(), T(0));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - T(std::pow(double(hp_.beta1), double(t_)));
    const T bc2 = T(1) - T(std::pow(double(hp_.beta2), double(t_)));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& node = *params_[i].node;
      if (node.grad.size() != node.values.size())
        throw std::logic_error("AdamT::step: parameter has no gradient");
      T* m = m_[i].data();
      T* v = v_[i].data();
      T* th = node.values.data();
      const T* g = node.grad.data();
      const int64_t n = node.numel();
      for (int64_t j = 0; j < n; ++j) {
        m[j] = hp_.beta1 * m[j] + (T(1) - hp_.beta1) * g[j];
        v[j] = hp_.beta2 * v[j] + (T(1) - hp_.beta2) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        th[j] -= hp_.alpha * mhat / (std::sqrt(vhat) + hp_.eps);
      }
    }
  }

  int64_t steps() const { return t_; }
  const AdamHyper<T>& hyper() const { return hp_; }
  const std::vector<std::vector<T>>& moment1() const { return m_; }
  const std::vector<std::vector<T>>& moment2() const { return v_; }

  // Used by checkpoint loading to resume training.
  void restore(int64_t t, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
      throw std::invalid_argument("AdamT::restore: state count mismatch");
    for (size_t i = 0; i < params_.size(); ++i)
      if (int64_t(m[i].size()) != params_[i].numel() ||
          int64_t(v[i].size()) != params_[i].numel())
        throw std::invalid_argument("AdamT::restore: state shape mismatch");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

private:
  std::vector<TensorT<T>> params_;
  AdamHyper<T> hp_;
  std::vector<std::vector<T>> m_, v_;
  int64_t t_ = 0;
};

// Truncated-Gaussian initializer: mean 0, the given standard deviation,
// values beyond 2 sigma rejected and redrawn. Returned tensor is trainable.
template <typename T>
TensorT<T> init_weights(std::vector<int> shape, Rng& rng, T sigma) {
  if (!(sigma > T(0))) throw std::invalid_argument("init_weights: sigma must be positive");
  auto t = TensorT<T>::zeros(std::move(shape), true);
  for (auto& v : t.values()) v = T(rng.truncated_normal(double(sigma)));
  return t;
}

}  // namespace icad
