#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "icad/config.hpp"

namespace icad {

// What a training run left on disk.
struct TrainResult {
  std::filesystem::path run_dir;
  std::filesystem::path final_checkpoint;   // always written, even for 0 batches
  std::filesystem::path best_checkpoint;    // empty when no validation pass ran
  std::filesystem::path loss_log;
  int64_t batches = 0;
};

// Called after each batch with the 1-based batch number, its training loss,
// and the validation loss when one was computed on that batch.
using TrainProgress = std::function<void(int64_t, double, std::optional<double>)>;

// Runs the configured training job: builds the model from config.seed, streams
// augmented patches, optimizes, logs per-batch losses to loss_log.csv, saves
// interval checkpoints plus model_final.icad (and model_best.icad once a
// validation loss exists), and stores the exact config in the run directory.
// Identical configs produce bitwise-identical logs and checkpoints.
TrainResult run_training(const RunConfig& config, const TrainProgress& progress = {});

}  // namespace icad
