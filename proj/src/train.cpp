#include "icad/train.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include "icad/autoencoder.hpp"
#include "icad/checkpoint.hpp"
#include "icad/data.hpp"
#include "icad/net.hpp"

namespace icad {
namespace {

namespace fs = std::filesystem;

// Sub-seed streams per run seed; keeps weight init, training batches, and the
// validation patch set on non-overlapping random sequences.
constexpr uint64_t kInitStream = 0;
constexpr uint64_t kTrainStream = 1;
constexpr uint64_t kValStream = 2;

std::string format_loss(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require_min_size(const std::vector<SurfaceImage>& images, const AugmentConfig& aug,
                      int patch, const std::string& role) {
  const int need = aug.min_image_size(patch);
  for (const auto& img : images)
    if (img.width < need || img.height < need)
      throw data_error("train: " + role + " image '" + img.name + "' is " +
                       std::to_string(img.width) + "x" + std::to_string(img.height) +
                       "; this augmentation setup needs at least " + std::to_string(need) + "x" +
                       std::to_string(need));
}

// One augmented patch: image choice and pose both come from `rng`.
std::vector<float> draw_patch(const std::vector<SurfaceImage>& images, Rng& rng,
                              const AugmentConfig& aug, const MaskSpec& mask) {
  const auto& img = images[size_t(rng.uniform_int(int64_t(images.size())))];
  return extract_training_patch(img, rng, aug, mask).patch;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("train: cannot write " + path.string());
  f << text;
  f.flush();
  if (!f) throw data_error("train: write failed for " + path.string());
}

}  // namespace

TrainResult run_training(const RunConfig& config, const TrainProgress& progress) {
  config.validate();
  if (config.train_dir.empty()) throw config_error("train: train_dir is required");

  const MaskSpec mask{};
  const AugmentConfig aug = config.augment();
  const bool is_autoencoder = config.model == "autoencoder";
  const int patch = mask.patch;
  const size_t patch_elems = size_t(patch) * size_t(patch);

  auto train_images = load_image_dir(config.train_dir, false);
  if (train_images.empty())
    throw data_error("train: no training images in " + config.train_dir);
  require_min_size(train_images, aug, patch, "training");

  std::vector<SurfaceImage> val_images;
  if (!config.val_dir.empty()) {
    val_images = load_image_dir(config.val_dir, false);
    if (val_images.empty()) throw data_error("train: no validation images in " + config.val_dir);
    require_min_size(val_images, aug, patch, "validation");
  }
  // Without a validation directory the loss is monitored on training images.
  const auto& val_pool = val_images.empty() ? train_images : val_images;

  const fs::path run_dir = resolved_out_dir(config);
  fs::create_directories(run_dir);
  const std::string config_text = serialize_run_config(config);
  write_text(run_dir / "config.txt", config_text);

  Rng init_rng(Rng::split(config.seed, kInitStream));
  CompletionNet completion;
  Autoencoder autoencoder;
  if (is_autoencoder) {
    autoencoder = Autoencoder::build(init_rng, config.sigma);
  } else {
    const auto spec =
        config.model == "canonical" ? canonical_network_spec() : desk_network_spec();
    completion = CompletionNet::build(spec, init_rng, config.sigma);
  }

  AdamHyper<float> hyper;
  hyper.alpha = config.alpha;
  hyper.beta1 = config.beta1;
  hyper.beta2 = config.beta2;
  hyper.eps = config.eps;
  AdamT<float> adam(is_autoencoder ? autoencoder.parameters() : completion.parameters(), hyper);

  auto forward = [&](const Tensor& x) {
    return is_autoencoder ? autoencoder.forward(x) : completion.forward(x);
  };
  auto snapshot = [&]() {
    return is_autoencoder ? make_checkpoint(autoencoder, &adam, config_text)
                          : make_checkpoint(completion, &adam, config_text);
  };

  // Fixed validation patches, independent of how many batches run.
  const uint64_t val_seed = Rng::split(config.seed, kValStream);
  std::vector<std::vector<float>> val_patches(size_t(config.val_patches));
  for (size_t i = 0; i < val_patches.size(); ++i) {
    Rng rng(Rng::split(val_seed, uint64_t(i)));
    val_patches[i] = draw_patch(val_pool, rng, aug, mask);
  }

  // Mean loss over the fixed patch set, evaluated in batch-sized chunks.
  auto validation_loss = [&]() {
    double total = 0.0;
    size_t done = 0;
    while (done < val_patches.size()) {
      const size_t count = std::min(size_t(config.batch_size), val_patches.size() - done);
      std::vector<float> targets(count * patch_elems);
      for (size_t i = 0; i < count; ++i)
        std::copy(val_patches[done + i].begin(), val_patches[done + i].end(),
                  targets.begin() + ptrdiff_t(i * patch_elems));
      std::vector<float> inputs = targets;
      if (!is_autoencoder)
        for (size_t i = 0; i < count; ++i)
          apply_mask_inplace({inputs.data() + i * patch_elems, patch_elems}, mask);
      Tensor target = Tensor::from_values({int(count), 1, patch, patch}, std::move(targets));
      Tensor input = Tensor::from_values({int(count), 1, patch, patch}, std::move(inputs));
      Tensor recon = forward(input);
      Tensor loss = is_autoencoder ? l1_loss(target, recon)
                                   : masked_l1_loss(target, recon, mask, config.lambda);
      total += double(loss.item()) * double(count);
      done += count;
    }
    return total / double(val_patches.size());
  };

  TrainResult result;
  result.run_dir = run_dir;
  result.loss_log = run_dir / "loss_log.csv";
  result.batches = config.batch_count;

  std::ofstream log(result.loss_log, std::ios::binary | std::ios::trunc);
  if (!log) throw data_error("train: cannot write " + result.loss_log.string());
  log << "batch,train_loss,val_loss\n";

  const uint64_t train_seed = Rng::split(config.seed, kTrainStream);
  double best_val = std::numeric_limits<double>::infinity();

  for (int64_t batch = 0; batch < config.batch_count; ++batch) {
    std::vector<float> targets(size_t(config.batch_size) * patch_elems);
    const uint64_t batch_seed = Rng::split(train_seed, uint64_t(batch));
    for (int item = 0; item < config.batch_size; ++item) {
      Rng rng(Rng::split(batch_seed, uint64_t(item)));
      auto p = draw_patch(train_images, rng, aug, mask);
      std::copy(p.begin(), p.end(), targets.begin() + ptrdiff_t(size_t(item) * patch_elems));
    }
    std::vector<float> inputs = targets;
    if (!is_autoencoder)
      for (int item = 0; item < config.batch_size; ++item)
        apply_mask_inplace({inputs.data() + size_t(item) * patch_elems, patch_elems}, mask);

    Tensor target =
        Tensor::from_values({config.batch_size, 1, patch, patch}, std::move(targets));
    Tensor input = Tensor::from_values({config.batch_size, 1, patch, patch}, std::move(inputs));

    adam.zero_grad();
    Tensor recon = forward(input);
    Tensor loss = is_autoencoder ? l1_loss(target, recon)
                                 : masked_l1_loss(target, recon, mask, config.lambda);
    loss.backward();
    adam.step();

    const double train_loss = double(loss.item());
    const bool at_val = (batch + 1) % config.val_every == 0;
    std::optional<double> val;
    log << (batch + 1) << ',' << format_loss(train_loss) << ',';
    if (at_val) {
      val = validation_loss();
      log << format_loss(*val);
      if (*val < best_val) {
        best_val = *val;
        result.best_checkpoint = run_dir / "model_best.icad";
        save_checkpoint(snapshot(), result.best_checkpoint);
      }
    }
    log << '\n';
    if (progress) progress(batch + 1, train_loss, val);

    if ((batch + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06lld.icad", static_cast<long long>(batch + 1));
      save_checkpoint(snapshot(), run_dir / name);
    }
  }

  log.flush();
  if (!log) throw data_error("train: write failed for " + result.loss_log.string());

  result.final_checkpoint = run_dir / "model_final.icad";
  save_checkpoint(snapshot(), result.final_checkpoint);
  return result;
}

}  // namespace icad
