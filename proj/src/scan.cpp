#include "icad/scan.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "icad/tensor.hpp"

namespace icad {

namespace {

std::vector<float> run_net(const CompletionNetT<float>& net, std::span<const float> in,
                           int count, int patch) {
  Tensor x = Tensor::from_values({count, 1, patch, patch},
                                 std::vector<float>(in.begin(), in.end()));
  const Tensor y = net.forward(x);
  return {y.values().begin(), y.values().end()};
}

}  // namespace

Reconstructor completion_reconstructor(const CompletionNetT<float>& net,
                                       const MaskSpec& mask) {
  mask.validate();
  return [&net, mask](std::span<const float> patches, int count) {
    std::vector<float> masked(patches.begin(), patches.end());
    const size_t area = size_t(mask.patch) * mask.patch;
    for (int i = 0; i < count; ++i)
      apply_mask_inplace(std::span<float>(masked).subspan(size_t(i) * area, area), mask);
    return run_net(net, masked, count, mask.patch);
  };
}

Reconstructor autoencoder_reconstructor(const AutoencoderT<float>& net) {
  return [&net](std::span<const float> patches, int count) {
    Tensor x = Tensor::from_values({count, 1, 128, 128},
                                   std::vector<float>(patches.begin(), patches.end()));
    const Tensor y = net.forward(x);
    return std::vector<float>{y.values().begin(), y.values().end()};
  };
}

void ScanParams::validate() const {
  mask.validate();
  if (stride < 1) throw std::invalid_argument("ScanParams: stride must be positive");
  if (batch < 1) throw std::invalid_argument("ScanParams: batch must be positive");
  if (score_block < 1 || score_block > mask.hole)
    throw std::invalid_argument("ScanParams: score block must fit inside the hole");
  if ((mask.patch - score_block) % 2 != 0)
    throw std::invalid_argument("ScanParams: score block cannot be centered");
}

std::vector<int> window_positions(int image_extent, int window, int stride) {
  if (image_extent < window)
    throw std::invalid_argument("window_positions: image smaller than the window");
  std::vector<int> xs;
  for (int x = 0; x + window <= image_extent; x += stride) xs.push_back(x);
  if (xs.back() != image_extent - window) xs.push_back(image_extent - window);
  return xs;
}

std::vector<float> score_patch(std::span<const float> patch, const Reconstructor& model,
                               const ScanParams& params) {
  params.validate();
  const int p = params.mask.patch;
  if (int64_t(patch.size()) != int64_t(p) * p)
    throw std::invalid_argument("score_patch: patch size does not match the scan geometry");
  const std::vector<float> recon = model(patch, 1);
  if (recon.size() != patch.size())
    throw std::logic_error("score_patch: model returned a mismatched reconstruction");

  const int start = params.score_start(), block = params.score_block;
  std::vector<float> out(size_t(block) * block);
  for (int y = 0; y < block; ++y)
    for (int x = 0; x < block; ++x) {
      const size_t at = size_t(start + y) * p + (start + x);
      out[size_t(y) * block + x] = std::abs(patch[at] - recon[at]);
    }
  return out;
}

AnomalyMap scan_image(const SurfaceImage& image, const Reconstructor& model,
                      const ScanParams& params, ScanStats* stats) {
  params.validate();
  const int p = params.mask.patch;
  if (image.width < p || image.height < p)
    throw std::invalid_argument("scan_image: image is smaller than one window");

  const std::vector<int> xs = window_positions(image.width, p, params.stride);
  const std::vector<int> ys = window_positions(image.height, p, params.stride);

  AnomalyMap map;
  map.width = image.width;
  map.height = image.height;
  map.scores.assign(map.size(), std::numeric_limits<float>::quiet_NaN());
  map.coverage.assign(map.size(), 0);

  struct Window {
    int x0, y0;
  };
  std::vector<Window> windows;
  windows.reserve(xs.size() * ys.size());
  for (int y0 : ys)
    for (int x0 : xs) windows.push_back({x0, y0});

  const int start = params.score_start(), block = params.score_block;
  const size_t area = size_t(p) * p;
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<float> batch_patches;
  for (size_t first = 0; first < windows.size(); first += size_t(params.batch)) {
    const int count = int(std::min(size_t(params.batch), windows.size() - first));
    batch_patches.resize(size_t(count) * area);
    for (int i = 0; i < count; ++i) {
      const Window& w = windows[first + size_t(i)];
      float* dst = batch_patches.data() + size_t(i) * area;
      for (int y = 0; y < p; ++y)
        std::memcpy(dst + size_t(y) * p,
                    image.pixels.data() + size_t(w.y0 + y) * image.width + w.x0,
                    size_t(p) * sizeof(float));
    }
    const std::vector<float> recon = model(batch_patches, count);
    if (recon.size() != batch_patches.size())
      throw std::logic_error("scan_image: model returned a mismatched reconstruction");

    for (int i = 0; i < count; ++i) {
      const Window& w = windows[first + size_t(i)];
      const float* x_pat = batch_patches.data() + size_t(i) * area;
      const float* r_pat = recon.data() + size_t(i) * area;
      for (int by = 0; by < block; ++by)
        for (int bx = 0; bx < block; ++bx) {
          const size_t in_patch = size_t(start + by) * p + (start + bx);
          const float s = std::abs(x_pat[in_patch] - r_pat[in_patch]);
          const size_t at = size_t(w.y0 + start + by) * map.width + (w.x0 + start + bx);
          map.scores[at] = map.coverage[at] == 0 ? s : std::max(map.scores[at], s);
          ++map.coverage[at];
        }
    }
  }

  if (stats) {
    const auto t1 = std::chrono::steady_clock::now();
    stats->patches = int64_t(windows.size());
    stats->seconds = std::chrono::duration<double>(t1 - t0).count();
    stats->patches_per_second =
        stats->seconds > 0.0 ? double(stats->patches) / stats->seconds : 0.0;
  }
  return map;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kAmapVersion = 1;

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

uint32_t pull_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

void write_anomaly_map(const std::filesystem::path& path, const AnomalyMap& map) {
  if (map.width <= 0 || map.height <= 0 || map.scores.size() != map.size())
    throw std::invalid_argument("write_anomaly_map: inconsistent map");
  std::vector<uint8_t> out;
  out.reserve(16 + map.size() * 4);
  out.insert(out.end(), {'A', 'M', 'A', 'P'});
  push_u32(out, kAmapVersion);
  push_u32(out, uint32_t(map.height));
  push_u32(out, uint32_t(map.width));
  for (float s : map.scores) push_u32(out, std::bit_cast<uint32_t>(s));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot create " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw data_error("write failed for " + path.string());
}

AnomalyMap read_anomaly_map(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "AMAP", 4) != 0)
    throw data_error(path.string() + ": not an anomaly-map file");
  if (pull_u32(bytes.data() + 4) != kAmapVersion)
    throw data_error(path.string() + ": unsupported anomaly-map version");

  AnomalyMap map;
  map.height = int(pull_u32(bytes.data() + 8));
  map.width = int(pull_u32(bytes.data() + 12));
  if (map.height <= 0 || map.width <= 0 || map.height > (1 << 20) || map.width > (1 << 20))
    throw data_error(path.string() + ": unreasonable anomaly-map dimensions");
  if (bytes.size() != 16 + map.size() * 4)
    throw data_error(path.string() + ": anomaly-map payload size mismatch");

  map.scores.resize(map.size());
  map.coverage.resize(map.size());
  for (size_t i = 0; i < map.size(); ++i) {
    map.scores[i] = std::bit_cast<float>(pull_u32(bytes.data() + 16 + i * 4));
    map.coverage[i] = std::isfinite(map.scores[i]) ? 1u : 0u;
  }
  return map;
}

GrayImage anomaly_map_to_image(const AnomalyMap& map) {
  GrayImage img;
  img.width = map.width;
  img.height = map.height;
  img.pixels.assign(map.size(), 0);

  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (size_t i = 0; i < map.size(); ++i)
    if (map.coverage[i] > 0) {
      lo = std::min(lo, map.scores[i]);
      hi = std::max(hi, map.scores[i]);
    }
  if (!(hi > lo)) return img;  // nothing scored, or a constant map

  const float range = hi - lo;
  for (size_t i = 0; i < map.size(); ++i)
    if (map.coverage[i] > 0)
      img.pixels[i] = uint8_t(std::lround((map.scores[i] - lo) / range * 255.0f));
  return img;
}

}  // namespace icad
