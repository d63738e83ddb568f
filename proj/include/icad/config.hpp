#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "icad/data.hpp"
#include "icad/errors.hpp"

namespace icad {

// Everything a training/evaluation run needs, with canonical defaults.
// Serialized as flat "key = value" lines; every key round-trips.
struct RunConfig {
  std::string model = "canonical";  // canonical | desk | autoencoder
  float lambda = 0.9f;              // hole weight of the completion loss
  float alpha = 0.0002f;            // optimizer step size
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float sigma = 0.02f;              // weight-init standard deviation
  int batch_size = 128;
  int64_t batch_count = 100000;
  uint64_t seed = 1;
  bool aug_rotate = true;
  bool aug_flip = true;
  bool aug_scale = true;
  bool aug_brightness = true;
  std::string train_dir;
  std::string val_dir;
  std::string test_dir;
  std::string out_dir = "runs/default";
  int stride = 16;
  int scan_batch = 4;               // windows per forward pass when scanning
  int val_every = 100;              // batches between validation-loss rows
  int val_patches = 64;             // fixed validation patch count
  int checkpoint_every = 500;       // batches between periodic checkpoints

  AugmentConfig augment() const;
  void validate() const;  // throws config_error
};

// Parses "key = value" text ('#' starts a comment). Unknown keys, malformed
// values, and out-of-range settings raise config_error.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical serialization: fixed key order, full float precision; parsing it
// back reproduces the struct exactly.
std::string serialize_run_config(const RunConfig& config);

// Output directory with the ICAD_OUT_ROOT environment override applied to
// relative paths.
std::filesystem::path resolved_out_dir(const RunConfig& config);

// Texture/synthesis settings in the same "key = value" format.
SynthJob parse_synth_job(const std::string& text);
SynthJob load_synth_job(const std::filesystem::path& path);
std::string serialize_synth_job(const SynthJob& job);

}  // namespace icad
