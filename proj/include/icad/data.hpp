#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icad/errors.hpp"
#include "icad/mask.hpp"
#include "icad/rng.hpp"

namespace icad {

// A whole surface image in normalized [-1, 1] values, with an optional
// per-pixel defect label mask (1 = defective).
struct SurfaceImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;
  std::vector<uint8_t> labels;  // empty, or width*height of {0, 1}
  std::string name;

  bool has_labels() const { return !labels.empty(); }
  size_t size() const { return size_t(width) * size_t(height); }
};

// One network-ready patch plus the mask geometry it was cut for.
struct PatchSample {
  std::vector<float> patch;     // mask.patch^2 values in [-1, 1]
  MaskSpec mask;
  std::vector<uint8_t> labels;  // empty, or mask.patch^2 of {0, 1}
};

// Which random transforms patch extraction applies. Every transform is
// individually switchable.
struct AugmentConfig {
  bool rotate = true;
  bool flip = true;
  bool scale = true;
  bool brightness = true;
  float scale_min = 0.9f;
  float scale_max = 1.1f;
  float brightness_max = 0.1f;

  // Distance the patch center must keep from every image border so that all
  // bilinear sampling taps stay inside the image. Depends on which transforms
  // resample (rotation needs the circumradius, zooming out inflates it).
  double center_margin(int patch_size) const;

  // Smallest square image the extractor accepts under this configuration.
  int min_image_size(int patch_size) const;
};

// Deterministic patch cut at an explicit pose: center (cx, cy), rotation,
// axis flips, sampling-footprint scale (zoom 2 reads a twice-as-wide region,
// shrinking the texture; zoom < 1 magnifies it), brightness offset. This is
// what the random extractor calls after drawing its parameters; tests call
// it directly.
PatchSample extract_patch_at(const SurfaceImage& img, double cx, double cy,
                             double angle_deg, bool flip_x, bool flip_y, double zoom,
                             float brightness, const MaskSpec& mask);

// Random patch with the configured augmentations. Positions are uniform over
// all centers whose sampling footprint stays inside the image; with every
// resampling transform disabled the patch is an exact pixel-aligned crop.
PatchSample extract_training_patch(const SurfaceImage& img, Rng& rng,
                                   const AugmentConfig& aug, const MaskSpec& mask = {});

// Zeroes the centered hole; everything else passes through unchanged.
std::vector<float> apply_mask(const PatchSample& sample);
void apply_mask_inplace(std::span<float> patch, const MaskSpec& mask);

// ---------------------------------------------------------------------------
// Synthetic surfaces
// ---------------------------------------------------------------------------

struct DefectSpec {
  int count_min = 1;
  int count_max = 3;
  float size_min = 6.0f;    // bounding-box edge in pixels
  float size_max = 20.0f;   // hard cap 24 so one scan window always covers a defect
  float contrast_min = 0.4f;
  float contrast_max = 0.8f;
};

struct TextureSpec {
  enum class Family { Grid, Waves };
  Family family = Family::Grid;
  float period = 16.0f;
  float orientation_deg = 20.0f;
  float distortion = 1.5f;         // amplitude (px) of the smooth warp field
  float brightness_jitter = 0.05f;
  float noise = 0.02f;
  int image_size = 256;
  DefectSpec defects;

  void validate() const;
};

// Where one injected defect ended up; enough to reconstruct its support.
struct DefectRecord {
  double cx, cy;       // center
  double a, b;         // semi-axes, a >= b
  double angle_deg;    // ellipse rotation
  float contrast;
  bool dark;
};

// Deterministic per (spec, seed). Defect-free images carry an all-zero label
// mask; with defects, labels mark exactly the pixels where the rendered
// profile reaches half contrast. Output values are quantized to the 8-bit
// grid so in-memory data equals a save/load round trip.
SurfaceImage generate_surface(const TextureSpec& spec, uint64_t seed, bool with_defects,
                              std::vector<DefectRecord>* placement = nullptr);

// ---------------------------------------------------------------------------
// Dataset directories
// ---------------------------------------------------------------------------

// Loads every .png/.pgm in a directory (sorted by filename). When with_masks
// is set, "<stem>_mask.<ext>" files are attached as labels; images lacking a
// mask get a warning line and empty labels. Mask files themselves are never
// listed as images.
std::vector<SurfaceImage> load_image_dir(const std::filesystem::path& dir,
                                         bool with_masks,
                                         std::vector<std::string>* warnings = nullptr);

struct SynthJob {
  TextureSpec texture;
  int n_train = 20;
  int n_val = 4;
  int n_test = 8;
  uint64_t seed = 1;
};

// Writes train/ val/ (fault-free) and test/ (defect-injected, with
// "<stem>_mask.png" label files) under out_dir. Byte-identical per seed.
void write_synthetic_dataset(const SynthJob& job, const std::filesystem::path& out_dir);

}  // namespace icad
