#include "icad/net.hpp"

#include <stdexcept>
#include <string>

namespace icad {

std::vector<LayerSpec> canonical_network_spec() {
  std::vector<LayerSpec> s;
  s.push_back(conv_layer(5, 1, 1, 32));
  s.push_back(conv_layer(3, 1, 1, 64));
  s.push_back(conv_layer(3, 1, 1, 64));
  s.push_back(conv_layer(3, 1, 2, 128));
  s.push_back(conv_layer(3, 1, 1, 128));
  s.push_back(conv_layer(3, 1, 1, 128));
  s.push_back(conv_layer(3, 2, 1, 128));
  s.push_back(conv_layer(3, 4, 1, 128));
  s.push_back(conv_layer(3, 8, 1, 128));
  s.push_back(conv_layer(3, 16, 1, 128));
  s.push_back(conv_layer(3, 1, 1, 128));
  s.push_back(conv_layer(3, 1, 1, 128));
  s.push_back({LayerSpec::Kind::Upscale});
  s.push_back(conv_layer(3, 1, 1, 64));
  s.push_back(conv_layer(3, 1, 1, 64));
  s.push_back(conv_layer(3, 1, 1, 32));
  s.push_back(conv_layer(3, 1, 1, 16));
  s.push_back(conv_layer(3, 1, 1, 1, /*act=*/false));
  s.push_back({LayerSpec::Kind::Clip});
  return s;
}

std::vector<LayerSpec> desk_network_spec() {
  auto s = canonical_network_spec();
  for (auto& layer : s) {
    if (layer.kind != LayerSpec::Kind::Conv) continue;
    if (layer.out_channels > 1) layer.out_channels /= 4;
  }
  return s;
}

std::vector<int> spatial_trace(const std::vector<LayerSpec>& spec, int input_size) {
  if (input_size <= 0) throw std::invalid_argument("spatial_trace: input size must be positive");
  std::vector<int> trace;
  trace.reserve(spec.size());
  int h = input_size;
  for (const auto& layer : spec) {
    switch (layer.kind) {
      case LayerSpec::Kind::Conv:
        h = (h + layer.stride - 1) / layer.stride;
        break;
      case LayerSpec::Kind::Upscale:
        h *= 2;
        break;
      case LayerSpec::Kind::Clip:
        break;
    }
    trace.push_back(h);
  }
  return trace;
}

void validate_network_spec(const std::vector<LayerSpec>& spec, int input_size) {
  if (spec.empty()) throw std::invalid_argument("network spec: empty layer list");
  int channels = 1;
  for (size_t i = 0; i < spec.size(); ++i) {
    const auto& layer = spec[i];
    const std::string where = "network spec layer " + std::to_string(i + 1);
    switch (layer.kind) {
      case LayerSpec::Kind::Conv:
        if (layer.kernel <= 0 || layer.kernel % 2 == 0)
          throw std::invalid_argument(where + ": kernel size must be odd and positive");
        if (layer.dilation < 1 || layer.stride < 1)
          throw std::invalid_argument(where + ": dilation and stride must be at least 1");
        if (layer.out_channels < 1)
          throw std::invalid_argument(where + ": output channels must be positive");
        channels = layer.out_channels;
        break;
      case LayerSpec::Kind::Upscale:
        break;
      case LayerSpec::Kind::Clip:
        if (!(layer.clip_lo < layer.clip_hi))
          throw std::invalid_argument(where + ": clip bounds out of order");
        break;
    }
  }
  const auto trace = spatial_trace(spec, input_size);
  if (trace.back() != input_size)
    throw std::invalid_argument("network spec: spatial trace ends at " +
                                std::to_string(trace.back()) + ", expected " +
                                std::to_string(input_size));
  if (channels != 1)
    throw std::invalid_argument("network spec: final layer must emit a single channel");
}

}  // namespace icad
