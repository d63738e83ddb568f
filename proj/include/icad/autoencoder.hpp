#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icad/adam.hpp"
#include "icad/rng.hpp"
#include "icad/tensor.hpp"

namespace icad {

// Baseline reconstruction model: bilinear downscale 128 -> 32, a fully
// connected bottleneck of width 128 with one ReLU, then bilinear upscale back
// to 128. Sees the whole (unmasked) patch.
template <typename T>
class AutoencoderT {
public:
  static constexpr int kPatch = 128;
  static constexpr int kInner = 32;
  static constexpr int kBottleneck = 128;
  static constexpr int kFlat = kInner * kInner;

  AutoencoderT() = default;

  static AutoencoderT build(Rng& rng, T sigma) {
    AutoencoderT net;
    net.w1_ = init_weights<T>({kBottleneck, kFlat}, rng, sigma);
    net.b1_ = TensorT<T>::zeros({kBottleneck}, true);
    net.w2_ = init_weights<T>({kFlat, kBottleneck}, rng, sigma);
    net.b2_ = TensorT<T>::zeros({kFlat}, true);
    return net;
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    if (x.shape().size() != 4 || x.dim(1) != 1 || x.dim(2) != kPatch || x.dim(3) != kPatch)
      throw std::invalid_argument("Autoencoder::forward: expected [batch, 1, 128, 128] input");
    const int batch = x.dim(0);
    auto h = bilinear_resize(x, kInner, kInner);
    auto flat = reshape(h, {batch, kFlat});
    auto code = relu(linear(flat, w1_, b1_));
    auto dec = linear(code, w2_, b2_);
    auto img = reshape(dec, {batch, 1, kInner, kInner});
    return bilinear_resize(img, kPatch, kPatch);
  }

  std::vector<TensorT<T>> parameters() const { return {w1_, b1_, w2_, b2_}; }

  std::vector<std::pair<std::string, TensorT<T>>> named_parameters() const {
    return {{"fc1_w", w1_}, {"fc1_b", b1_}, {"fc2_w", w2_}, {"fc2_b", b2_}};
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
  }

  bool built() const { return w1_.defined(); }

private:
  TensorT<T> w1_, b1_, w2_, b2_;
};

using Autoencoder = AutoencoderT<float>;

}  // namespace icad
