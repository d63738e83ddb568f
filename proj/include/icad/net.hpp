#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "icad/adam.hpp"
#include "icad/mask.hpp"
#include "icad/rng.hpp"
#include "icad/tensor.hpp"

namespace icad {

// One stage of the completion network.
struct LayerSpec {
  enum class Kind { Conv, Upscale, Clip };
  Kind kind = Kind::Conv;
  // Conv fields: square kernel, dilation, stride, output channels, whether an
  // ELU follows.
  int kernel = 3;
  int dilation = 1;
  int stride = 1;
  int out_channels = 0;
  bool activation = true;
  // Clip fields.
  float clip_lo = -1.0f;
  float clip_hi = 1.0f;

  bool operator==(const LayerSpec&) const = default;
};

inline LayerSpec conv_layer(int k, int d, int s, int c, bool act = true) {
  return {LayerSpec::Kind::Conv, k, d, s, c, act, 0.0f, 0.0f};
}

// The full-width network: 17 convolutions around one stride-2 stage and one
// 2x bilinear upscale, ending in a single linear output channel clipped to
// [-1, 1].
std::vector<LayerSpec> canonical_network_spec();

// Same topology with every channel count quartered; small enough to train and
// test on a CPU in minutes.
std::vector<LayerSpec> desk_network_spec();

// Per-layer output spatial size, one entry per layer, starting from a square
// input of the given size.
std::vector<int> spatial_trace(const std::vector<LayerSpec>& spec, int input_size);

// Rejects specs that are structurally broken or whose spatial trace does not
// return to the input resolution with a single output channel.
void validate_network_spec(const std::vector<LayerSpec>& spec, int input_size = 128);

template <typename T>
class CompletionNetT {
public:
  CompletionNetT() = default;

  // Weights drawn from the truncated-Gaussian initializer, biases zero.
  static CompletionNetT build(const std::vector<LayerSpec>& spec, Rng& rng, T sigma) {
    validate_network_spec(spec);
    CompletionNetT net;
    net.spec_ = spec;
    int cin = 1;
    for (const auto& layer : spec) {
      if (layer.kind != LayerSpec::Kind::Conv) continue;
      net.weights_.push_back(
          init_weights<T>({layer.out_channels, cin, layer.kernel, layer.kernel}, rng, sigma));
      net.biases_.push_back(TensorT<T>::zeros({layer.out_channels}, true));
      cin = layer.out_channels;
    }
    return net;
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    if (x.shape().size() != 4 || x.dim(1) != 1)
      throw std::invalid_argument("CompletionNet::forward: expected [batch, 1, h, w] input");
    TensorT<T> h = x;
    size_t ci = 0;
    for (const auto& layer : spec_) {
      switch (layer.kind) {
        case LayerSpec::Kind::Conv:
          h = conv2d(h, weights_[ci], biases_[ci], layer.dilation, layer.stride);
          if (layer.activation) h = elu(h);
          ++ci;
          break;
        case LayerSpec::Kind::Upscale:
          h = bilinear_upscale_2x(h);
          break;
        case LayerSpec::Kind::Clip:
          h = clip(h, T(layer.clip_lo), T(layer.clip_hi));
          break;
      }
    }
    return h;
  }

  std::vector<TensorT<T>> parameters() const {
    std::vector<TensorT<T>> out;
    for (size_t i = 0; i < weights_.size(); ++i) {
      out.push_back(weights_[i]);
      out.push_back(biases_[i]);
    }
    return out;
  }

  // conv1_w, conv1_b, conv2_w, ... numbered by conv position.
  std::vector<std::pair<std::string, TensorT<T>>> named_parameters() const {
    std::vector<std::pair<std::string, TensorT<T>>> out;
    for (size_t i = 0; i < weights_.size(); ++i) {
      const std::string base = "conv" + std::to_string(i + 1);
      out.emplace_back(base + "_w", weights_[i]);
      out.emplace_back(base + "_b", biases_[i]);
    }
    return out;
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
  }

  const std::vector<LayerSpec>& layers() const { return spec_; }
  bool built() const { return !spec_.empty(); }

private:
  std::vector<LayerSpec> spec_;
  std::vector<TensorT<T>> weights_, biases_;
};

using CompletionNet = CompletionNetT<float>;

}  // namespace icad
