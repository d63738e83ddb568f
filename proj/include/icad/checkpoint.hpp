#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icad/autoencoder.hpp"
#include "icad/errors.hpp"
#include "icad/net.hpp"

namespace icad {

// One parameter tensor as stored on disk.
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

// Optimizer snapshot aligned with the tensor list (one m/v pair per tensor,
// same order).
struct OptimizerState {
  int64_t steps = 0;
  AdamHyper<float> hyper;
  std::vector<std::vector<float>> m, v;
};

// Complete model snapshot. File layout: "ICAD" magic, format version, model
// kind, layer list (completion models), named tensors as row-major 32-bit
// little-endian floats, optional optimizer state, then the run-config text
// the model was trained with. Loading a saved model reproduces bitwise
// identical forward outputs.
struct Checkpoint {
  enum class ModelKind : uint32_t { Completion = 0, Autoencoder = 1 };

  ModelKind kind = ModelKind::Completion;
  std::vector<LayerSpec> layers;  // completion models only
  std::vector<NamedTensor> tensors;
  std::optional<OptimizerState> optimizer;
  std::string config_text;
};

inline constexpr uint32_t kCheckpointVersion = 1;

Checkpoint make_checkpoint(const CompletionNet& net, const AdamT<float>* optimizer,
                           const std::string& config_text);
Checkpoint make_checkpoint(const Autoencoder& net, const AdamT<float>* optimizer,
                           const std::string& config_text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);  // throws data_error

// Rebuild a model from a snapshot; tensor names and shapes must match the
// model's own parameter list exactly.
CompletionNet restore_completion(const Checkpoint& ckpt);
Autoencoder restore_autoencoder(const Checkpoint& ckpt);

// Optimizer resume: params must be the restored model's parameters().
AdamT<float> restore_adam(const Checkpoint& ckpt, std::vector<Tensor> params);

}  // namespace icad
