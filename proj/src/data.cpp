#include "icad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "icad/image_io.hpp"

namespace icad {

namespace {

constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }

float sample_bilinear(const SurfaceImage& img, double u, double v) {
  const auto clamp_axis = [](double t, int n) {
    if (t < 0.0) return std::pair<int, double>{0, 0.0};
    if (t >= double(n - 1)) return std::pair<int, double>{n - 1, 0.0};
    const int i = int(t);
    return std::pair<int, double>{i, t - double(i)};
  };
  const auto [x0, fx] = clamp_axis(u, img.width);
  const auto [y0, fy] = clamp_axis(v, img.height);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double p00 = img.pixels[size_t(y0) * img.width + x0];
  const double p01 = img.pixels[size_t(y0) * img.width + x1];
  const double p10 = img.pixels[size_t(y1) * img.width + x0];
  const double p11 = img.pixels[size_t(y1) * img.width + x1];
  const double top = p00 + fx * (p01 - p00);
  const double bot = p10 + fx * (p11 - p10);
  return float(top + fy * (bot - top));
}

uint8_t sample_label(const SurfaceImage& img, double u, double v) {
  const int x = std::clamp(int(std::lround(u)), 0, img.width - 1);
  const int y = std::clamp(int(std::lround(v)), 0, img.height - 1);
  return img.labels[size_t(y) * img.width + x];
}

}  // namespace

double AugmentConfig::center_margin(int patch_size) const {
  const double half = (patch_size - 1) / 2.0;
  double radius = half;
  if (rotate) radius *= std::numbers::sqrt2;
  if (scale) {
    if (!(scale_min > 0.0f && scale_min <= scale_max))
      throw std::invalid_argument("AugmentConfig: bad scale range");
    if (scale_min < 1.0f) radius /= double(scale_min);
  }
  return radius;
}

int AugmentConfig::min_image_size(int patch_size) const {
  if (!rotate && !scale) return patch_size;
  return int(std::ceil(2.0 * center_margin(patch_size) + 1.0));
}

PatchSample extract_patch_at(const SurfaceImage& img, double cx, double cy,
                             double angle_deg, bool flip_x, bool flip_y, double zoom,
                             float brightness, const MaskSpec& mask) {
  mask.validate();
  if (img.width < mask.patch || img.height < mask.patch)
    throw std::invalid_argument("extract_patch_at: image smaller than the patch");
  const int p = mask.patch;
  const double half = (p - 1) / 2.0;
  const double ca = std::cos(deg2rad(angle_deg)), sa = std::sin(deg2rad(angle_deg));
  const double sx = (flip_x ? -1.0 : 1.0) * zoom;
  const double sy = (flip_y ? -1.0 : 1.0) * zoom;

  PatchSample out;
  out.mask = mask;
  out.patch.resize(size_t(p) * p);
  const bool with_labels = img.has_labels();
  if (with_labels) out.labels.assign(size_t(p) * p, 0);

  for (int y = 0; y < p; ++y) {
    const double py = (double(y) - half) * sy;
    for (int x = 0; x < p; ++x) {
      const double px = (double(x) - half) * sx;
      const double u = cx + ca * px - sa * py;
      const double v = cy + sa * px + ca * py;
      float val = sample_bilinear(img, u, v) + brightness;
      out.patch[size_t(y) * p + x] = std::clamp(val, -1.0f, 1.0f);
      if (with_labels) out.labels[size_t(y) * p + x] = sample_label(img, u, v);
    }
  }
  return out;
}

PatchSample extract_training_patch(const SurfaceImage& img, Rng& rng,
                                   const AugmentConfig& aug, const MaskSpec& mask) {
  mask.validate();
  const int p = mask.patch;
  const int need = aug.min_image_size(p);
  if (img.width < need || img.height < need)
    throw std::invalid_argument("extract_training_patch: image " +
                                std::to_string(img.width) + "x" + std::to_string(img.height) +
                                " smaller than the required " + std::to_string(need) + "x" +
                                std::to_string(need) + " for the enabled augmentations");

  if (!aug.rotate && !aug.scale) {
    // No resampling: exact pixel-aligned crop, flips as index mirrors.
    const int x0 = int(rng.uniform_int(img.width - p + 1));
    const int y0 = int(rng.uniform_int(img.height - p + 1));
    const bool fx = aug.flip && rng.coin();
    const bool fy = aug.flip && rng.coin();
    const float brightness =
        aug.brightness ? float(rng.uniform(-double(aug.brightness_max),
                                           double(aug.brightness_max)))
                       : 0.0f;
    PatchSample out;
    out.mask = mask;
    out.patch.resize(size_t(p) * p);
    const bool with_labels = img.has_labels();
    if (with_labels) out.labels.assign(size_t(p) * p, 0);
    for (int y = 0; y < p; ++y) {
      const int sy = y0 + (fy ? p - 1 - y : y);
      for (int x = 0; x < p; ++x) {
        const int sx = x0 + (fx ? p - 1 - x : x);
        const float raw = img.pixels[size_t(sy) * img.width + sx];
        out.patch[size_t(y) * p + x] =
            brightness == 0.0f ? raw : std::clamp(raw + brightness, -1.0f, 1.0f);
        if (with_labels)
          out.labels[size_t(y) * p + x] = img.labels[size_t(sy) * img.width + sx];
      }
    }
    return out;
  }

  const double margin = aug.center_margin(p);
  const double cx = rng.uniform(margin, double(img.width - 1) - margin);
  const double cy = rng.uniform(margin, double(img.height - 1) - margin);
  const double angle = aug.rotate ? rng.uniform(-180.0, 180.0) : 0.0;
  const bool fx = aug.flip && rng.coin();
  const bool fy = aug.flip && rng.coin();
  const double zoom =
      aug.scale ? 1.0 / rng.uniform(double(aug.scale_min), double(aug.scale_max)) : 1.0;
  const float brightness =
      aug.brightness
          ? float(rng.uniform(-double(aug.brightness_max), double(aug.brightness_max)))
          : 0.0f;
  return extract_patch_at(img, cx, cy, angle, fx, fy, zoom, brightness, mask);
}

std::vector<float> apply_mask(const PatchSample& sample) {
  std::vector<float> out = sample.patch;
  apply_mask_inplace(out, sample.mask);
  return out;
}

void apply_mask_inplace(std::span<float> patch, const MaskSpec& mask) {
  mask.validate();
  if (int64_t(patch.size()) != int64_t(mask.patch) * mask.patch)
    throw std::invalid_argument("apply_mask: patch size does not match the mask spec");
  for (int y = mask.hole_start(); y < mask.hole_end(); ++y)
    for (int x = mask.hole_start(); x < mask.hole_end(); ++x)
      patch[size_t(y) * mask.patch + x] = 0.0f;
}

// ---------------------------------------------------------------------------
// Synthetic surfaces
// ---------------------------------------------------------------------------

void TextureSpec::validate() const {
  if (!(period >= 2.0f))
    throw std::invalid_argument("TextureSpec: period must be at least 2 px");
  if (image_size < 128)
    throw std::invalid_argument("TextureSpec: image size must be at least 128");
  if (defects.count_min < 0 || defects.count_max < defects.count_min)
    throw std::invalid_argument("TextureSpec: bad defect count range");
  if (!(defects.size_min >= 2.0f && defects.size_max >= defects.size_min &&
        defects.size_max <= 24.0f))
    throw std::invalid_argument(
        "TextureSpec: defect sizes must lie in [2, 24] px (scan coverage bound)");
  if (!(defects.contrast_min >= 0.0f && defects.contrast_max >= defects.contrast_min))
    throw std::invalid_argument("TextureSpec: bad defect contrast range");
  if (distortion < 0.0f || brightness_jitter < 0.0f || noise < 0.0f)
    throw std::invalid_argument("TextureSpec: amplitudes must be non-negative");
}

namespace {

// Profile of one defect at a pixel: 1 deep inside the ellipse, 0 outside,
// linear ramp about 1.5 px wide across the boundary. The label rule is
// profile >= 0.5, i.e. the interior of the recorded ellipse.
double defect_profile(const DefectRecord& d, double x, double y) {
  const double ca = std::cos(deg2rad(d.angle_deg)), sa = std::sin(deg2rad(d.angle_deg));
  const double rx = x - d.cx, ry = y - d.cy;
  const double ex = (ca * rx + sa * ry) / d.a;
  const double ey = (-sa * rx + ca * ry) / d.b;
  const double rho = std::sqrt(ex * ex + ey * ey);
  const double dist = (1.0 - rho) * std::min(d.a, d.b);
  return std::clamp(dist / 1.5 + 0.5, 0.0, 1.0);
}

}  // namespace

SurfaceImage generate_surface(const TextureSpec& spec, uint64_t seed, bool with_defects,
                              std::vector<DefectRecord>* placement) {
  spec.validate();
  Rng rng(seed);
  const int s = spec.image_size;

  // Per-image parameters, drawn in a fixed order.
  const double phase_u = rng.uniform(0.0, double(spec.period));
  const double phase_v = rng.uniform(0.0, double(spec.period));
  const double orient = deg2rad(double(spec.orientation_deg) + rng.uniform(-3.0, 3.0));
  // Smooth warp: one low-frequency sinusoid per displacement component.
  const double wf = 2.0 * kPi / double(s);
  const double fx1 = rng.uniform(0.3, 0.7) * wf, fy1 = rng.uniform(0.3, 0.7) * wf;
  const double ph1 = rng.uniform(0.0, 2.0 * kPi);
  const double fx2 = rng.uniform(0.3, 0.7) * wf, fy2 = rng.uniform(0.3, 0.7) * wf;
  const double ph2 = rng.uniform(0.0, 2.0 * kPi);
  const double bright = rng.uniform(-double(spec.brightness_jitter),
                                    double(spec.brightness_jitter));

  std::vector<DefectRecord> defects;
  if (with_defects) {
    const int count = spec.defects.count_min +
                      int(rng.uniform_int(spec.defects.count_max - spec.defects.count_min + 1));
    // Keep the whole defect inside the region a stride-16 scan scores, so
    // every labeled pixel can actually be detected.
    const double edge = 66.0;
    if (double(s - 1) - edge < edge)
      throw std::invalid_argument(
          "generate_surface: image too small to place defects inside the scanned region");
    for (int i = 0; i < count; ++i) {
      DefectRecord d;
      d.cx = rng.uniform(edge, double(s - 1) - edge);
      d.cy = rng.uniform(edge, double(s - 1) - edge);
      const double size = rng.uniform(double(spec.defects.size_min),
                                      double(spec.defects.size_max));
      d.a = size / 2.0;
      d.b = d.a * rng.uniform(0.55, 1.0);
      d.angle_deg = rng.uniform(0.0, 180.0);
      d.contrast = float(rng.uniform(double(spec.defects.contrast_min),
                                     double(spec.defects.contrast_max)));
      d.dark = rng.coin();
      defects.push_back(d);
    }
  }

  SurfaceImage img;
  img.width = s;
  img.height = s;
  img.pixels.resize(size_t(s) * s);
  img.labels.assign(size_t(s) * s, 0);

  const double co = std::cos(orient), so = std::sin(orient);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double dx = spec.distortion * std::sin(fx1 * x + fy1 * y + ph1);
      const double dy = spec.distortion * std::sin(fx2 * x + fy2 * y + ph2);
      const double wx = x + dx, wy = y + dy;
      const double u = co * wx + so * wy;
      const double v = -so * wx + co * wy;
      double val;
      if (spec.family == TextureSpec::Family::Grid) {
        val = 0.5 * (0.55 * std::cos(2.0 * kPi * (u + phase_u) / spec.period) +
                     0.45 * std::cos(2.0 * kPi * (v + phase_v) / spec.period));
      } else {
        // Three interfering plane waves 60 degrees apart.
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) {
          const double th = deg2rad(60.0 * k);
          const double proj = std::cos(th) * u + std::sin(th) * v;
          acc += std::cos(2.0 * kPi * (proj + phase_u + k * phase_v) / spec.period);
        }
        val = acc / 3.0;
      }
      val += bright;

      for (const auto& d : defects) {
        const double prof = defect_profile(d, x, y);
        if (prof <= 0.0) continue;
        val += (d.dark ? -1.0 : 1.0) * double(d.contrast) * prof;
        if (prof >= 0.5) img.labels[size_t(y) * s + x] = 1;
      }
      img.pixels[size_t(y) * s + x] = float(val);
    }
  }

  // Pixel noise last, one draw per pixel in row-major order.
  if (spec.noise > 0.0f) {
    for (auto& v : img.pixels) v += float(rng.normal(0.0, double(spec.noise)));
  }

  // Clamp and snap to the 8-bit grid so the in-memory image equals its own
  // save/load round trip.
  for (auto& v : img.pixels) {
    const float c = std::clamp(v, -1.0f, 1.0f);
    v = std::round((c + 1.0f) * 127.5f) / 127.5f - 1.0f;
  }

  if (!with_defects) img.labels.assign(size_t(s) * s, 0);
  if (placement) *placement = defects;
  return img;
}

// ---------------------------------------------------------------------------
// Dataset directories
// ---------------------------------------------------------------------------

namespace {

bool is_image_file(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".pgm";
}

bool is_mask_file(const std::filesystem::path& p) {
  const auto stem = p.stem().string();
  return stem.size() > 5 && stem.ends_with("_mask");
}

}  // namespace

std::vector<SurfaceImage> load_image_dir(const std::filesystem::path& dir, bool with_masks,
                                         std::vector<std::string>* warnings) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw data_error(dir.string() + " is not a readable directory");

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (is_image_file(p) && !is_mask_file(p)) files.push_back(p);
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  if (files.empty()) throw data_error("no images (.png/.pgm) found in " + dir.string());

  std::vector<SurfaceImage> out;
  for (const auto& p : files) {
    const GrayImage raw = read_gray_image(p);
    SurfaceImage img;
    img.width = raw.width;
    img.height = raw.height;
    img.pixels = to_normalized(raw);
    img.name = p.stem().string();

    if (with_masks) {
      std::filesystem::path mask_path;
      for (const char* ext : {".png", ".pgm"}) {
        auto candidate = p.parent_path() / (p.stem().string() + "_mask" + ext);
        if (std::filesystem::exists(candidate)) {
          mask_path = candidate;
          break;
        }
      }
      if (mask_path.empty()) {
        if (warnings)
          warnings->push_back("warning: no label mask for " + p.filename().string() +
                              "; image excluded from metrics");
      } else {
        const GrayImage mask = read_gray_image(mask_path);
        if (mask.width != img.width || mask.height != img.height)
          throw data_error(mask_path.string() + ": mask dimensions do not match image");
        img.labels.resize(mask.size());
        for (size_t i = 0; i < mask.size(); ++i) img.labels[i] = mask.pixels[i] >= 128 ? 1 : 0;
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

void write_synthetic_dataset(const SynthJob& job, const std::filesystem::path& out_dir) {
  job.texture.validate();
  if (job.n_train < 1 || job.n_val < 0 || job.n_test < 0)
    throw std::invalid_argument("write_synthetic_dataset: bad split sizes");

  struct Split {
    const char* name;
    int count;
    bool defects;
    uint64_t tag;
  };
  const Split splits[] = {{"train", job.n_train, false, 0},
                          {"val", job.n_val, false, 1},
                          {"test", job.n_test, true, 2}};

  for (const auto& split : splits) {
    const auto dir = out_dir / split.name;
    std::filesystem::create_directories(dir);
    for (int i = 0; i < split.count; ++i) {
      const uint64_t seed = Rng::split(job.seed, split.tag * 1000000ull + uint64_t(i));
      const SurfaceImage img = generate_surface(job.texture, seed, split.defects);
      char stem[32];
      std::snprintf(stem, sizeof stem, "img_%03d", i);
      write_png_gray(dir / (std::string(stem) + ".png"),
                     from_normalized(img.width, img.height, img.pixels));
      if (split.defects) {
        GrayImage mask;
        mask.width = img.width;
        mask.height = img.height;
        mask.pixels.resize(img.size());
        for (size_t j = 0; j < img.size(); ++j) mask.pixels[j] = img.labels[j] ? 255 : 0;
        write_png_gray(dir / (std::string(stem) + "_mask.png"), mask);
      }
    }
  }
}

}  // namespace icad
