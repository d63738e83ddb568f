#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "icad/autoencoder.hpp"
#include "icad/data.hpp"
#include "icad/errors.hpp"
#include "icad/image_io.hpp"
#include "icad/mask.hpp"
#include "icad/net.hpp"

namespace icad {

// Per-pixel anomaly scores for a whole image. Pixels no scoring block ever
// touched hold a quiet NaN and coverage 0; scored pixels hold the maximum
// score any block assigned them.
struct AnomalyMap {
  int height = 0;
  int width = 0;
  std::vector<float> scores;
  std::vector<uint32_t> coverage;

  size_t size() const { return size_t(width) * size_t(height); }
  bool scored(int x, int y) const { return coverage[size_t(y) * width + x] > 0; }
  float at(int x, int y) const { return scores[size_t(y) * width + x]; }
};

// Model adapter for scanning: receives `count` flattened patches back to
// back, returns their reconstructions in the same layout. The adapters below
// keep a reference to the network, which must outlive them.
using Reconstructor =
    std::function<std::vector<float>(std::span<const float> patches, int count)>;

// Completion model: the patch is center-masked before the forward pass, so
// the reconstruction of the hole comes purely from the surroundings.
Reconstructor completion_reconstructor(const CompletionNetT<float>& net,
                                       const MaskSpec& mask = {});

// Baseline model: the patch is reconstructed from itself, unmasked.
Reconstructor autoencoder_reconstructor(const AutoencoderT<float>& net);

struct ScanParams {
  int stride = 16;
  int batch = 4;          // windows per forward pass; affects speed only
  int score_block = 24;   // edge of the centered block that receives scores
  MaskSpec mask;

  void validate() const;
  // Offset of the score block inside the window.
  int score_start() const { return (mask.patch - score_block) / 2; }
};

struct ScanStats {
  int64_t patches = 0;
  double seconds = 0.0;
  double patches_per_second = 0.0;
};

// Positions of the sliding window along one axis: every multiple of the
// stride that fits, plus a final window clamped to the far edge.
std::vector<int> window_positions(int image_extent, int window, int stride);

// Scores one patch: absolute difference between the patch and its
// reconstruction over the centered score block, row-major block layout.
std::vector<float> score_patch(std::span<const float> patch, const Reconstructor& model,
                               const ScanParams& params = {});

// Slides the window over the image, scores every window's center block, and
// merges overlaps by per-pixel maximum.
AnomalyMap scan_image(const SurfaceImage& image, const Reconstructor& model,
                      const ScanParams& params = {}, ScanStats* stats = nullptr);

// Binary anomaly-map file: magic "AMAP", then version, height, width as
// little-endian u32, then height*width row-major little-endian f32 scores
// (NaN = unscored). Reading marks finite pixels with coverage 1.
void write_anomaly_map(const std::filesystem::path& path, const AnomalyMap& map);
AnomalyMap read_anomaly_map(const std::filesystem::path& path);

// Visualization: min-max normalizes the scored pixels onto 0..255; unscored
// pixels (and everything, when all scores are equal) render as 0.
GrayImage anomaly_map_to_image(const AnomalyMap& map);

}  // namespace icad
