#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "icad/checkpoint.hpp"
#include "icad/config.hpp"
#include "icad/data.hpp"
#include "icad/image_io.hpp"
#include "icad/metrics.hpp"
#include "icad/scan.hpp"
#include "icad/train.hpp"

namespace fs = std::filesystem;
using namespace icad;

namespace {

// Output directories honor the same environment override as training runs.
fs::path resolve_out(const std::string& dir) {
  RunConfig probe;
  probe.out_dir = dir;
  return resolved_out_dir(probe);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_file;
  // Flag overrides are collected as text and appended after the config file
  // content, so the config parser is the single authority on types and
  // ranges. Order matches the config reference in the README.
  std::vector<std::pair<std::string, std::string>> overrides;
};

void setup_train(CLI::App& app, TrainArgs& args) {
  app.add_option("--config", args.config_file, "run-config file (key = value lines)");
  static const char* kKeys[] = {"model",       "lambda",         "alpha",
                                "beta1",       "beta2",          "eps",
                                "sigma",       "batch_size",     "batch_count",
                                "seed",        "aug_rotate",     "aug_flip",
                                "aug_scale",   "aug_brightness", "train_dir",
                                "val_dir",     "test_dir",       "out_dir",
                                "stride",      "scan_batch",     "val_every",
                                "val_patches", "checkpoint_every"};
  for (const char* key : kKeys) {
    app.add_option_function<std::string>(
        std::string("--") + key,
        [&args, key](const std::string& value) { args.overrides.emplace_back(key, value); },
        std::string("overrides config key '") + key + "'");
  }
}

int cmd_train(const TrainArgs& args) {
  std::string text;
  if (!args.config_file.empty()) text = read_text_file(args.config_file);
  for (const auto& [key, value] : args.overrides) text += "\n" + key + " = " + value + "\n";
  RunConfig config = parse_run_config(text);

  std::cout << "training model '" << config.model << "' for " << config.batch_count
            << " batches (batch size " << config.batch_size << ", seed " << config.seed << ")\n";
  TrainResult result = run_training(
      config, [&](int64_t batch, double train_loss, std::optional<double> val_loss) {
        if (val_loss || batch == config.batch_count) {
          std::cout << "batch " << batch << "/" << config.batch_count << "  train "
                    << fmt(train_loss);
          if (val_loss) std::cout << "  val " << fmt(*val_loss);
          std::cout << "\n" << std::flush;
        }
      });

  std::cout << "run directory: " << result.run_dir.string() << "\n"
            << "final checkpoint: " << result.final_checkpoint.string() << "\n";
  if (!result.best_checkpoint.empty())
    std::cout << "best checkpoint: " << result.best_checkpoint.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// shared model loading and scanning
// ---------------------------------------------------------------------------

// Keeps the restored model alive for as long as the reconstructor is used.
struct LoadedModel {
  CompletionNet completion;
  Autoencoder autoencoder;
  Reconstructor reconstruct;
  std::string kind;
};

LoadedModel load_model(const fs::path& checkpoint_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  LoadedModel m;
  if (ckpt.kind == Checkpoint::ModelKind::Completion) {
    m.completion = restore_completion(ckpt);
    m.reconstruct = completion_reconstructor(m.completion);
    m.kind = "completion";
  } else {
    m.autoencoder = restore_autoencoder(ckpt);
    m.reconstruct = autoencoder_reconstructor(m.autoencoder);
    m.kind = "autoencoder";
  }
  return m;
}

ScanParams make_scan_params(int stride, int scan_batch) {
  ScanParams params;
  params.stride = stride;
  params.batch = scan_batch;
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  return params;
}

// Writes <stem>.amap and <stem>.png under dir.
void write_map_files(const fs::path& dir, const std::string& stem, const AnomalyMap& map) {
  write_anomaly_map(dir / (stem + ".amap"), map);
  write_gray_image(dir / (stem + ".png"), anomaly_map_to_image(map));
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string test_dir;
  std::string out_dir;
  int stride = 16;
  int scan_batch = 4;
};

void setup_eval(CLI::App& app, EvalArgs& args) {
  app.add_option("--checkpoint", args.checkpoint, "model checkpoint (.icad)")->required();
  app.add_option("--test-dir", args.test_dir, "directory of test images with *_mask files")
      ->required();
  app.add_option("--out", args.out_dir, "output directory")->required();
  app.add_option("--stride", args.stride, "scan stride in pixels");
  app.add_option("--scan-batch", args.scan_batch, "windows per forward pass");
}

int cmd_eval(const EvalArgs& args) {
  LoadedModel model = load_model(args.checkpoint);
  ScanParams params = make_scan_params(args.stride, args.scan_batch);

  std::vector<std::string> warnings;
  auto images = load_image_dir(args.test_dir, /*with_masks=*/true, &warnings);
  for (const auto& w : warnings) std::cerr << w << "\n";
  if (images.empty()) throw data_error("eval: no images in " + args.test_dir);

  const fs::path out = resolve_out(args.out_dir);
  const fs::path maps = out / "maps";
  fs::create_directories(maps);

  PixelSamples samples;
  int labeled = 0;
  for (const auto& img : images) {
    ScanStats stats;
    AnomalyMap map = scan_image(img, model.reconstruct, params, &stats);
    write_map_files(maps, fs::path(img.name).stem().string(), map);
    std::cout << img.name << ": " << stats.patches << " windows, "
              << fmt(stats.patches_per_second) << " windows/s\n";
    if (img.has_labels()) {
      append_scored_pixels(samples, map, img.labels);
      ++labeled;
    }
  }
  if (samples.scores.empty())
    throw data_error("eval: no labeled pixels to score (no *_mask files matched)");
  if (samples.excluded_positives > 0)
    std::cerr << "warning: " << samples.excluded_positives
              << " defective pixels lie outside scored coverage\n";

  EvalSummary summary;
  try {
    summary.auroc = roc_curve(samples.scores, samples.labels).auc;
    summary.auprc = pr_curve(samples.scores, samples.labels).auc;
  } catch (const undefined_metric_error& e) {
    throw data_error(std::string("eval: ") + e.what());
  }
  for (uint8_t l : samples.labels) (l ? summary.positives : summary.negatives)++;
  summary.excluded_pixels = samples.excluded_pixels;

  write_eval_summary(out / "metrics.json", summary);
  write_curve_csv(out / "roc.csv", roc_curve(samples.scores, samples.labels));
  write_curve_csv(out / "pr.csv", pr_curve(samples.scores, samples.labels));

  std::cout << "evaluated " << labeled << "/" << images.size() << " labeled images, "
            << samples.scores.size() << " scored pixels (" << summary.positives
            << " defective)\n"
            << "AUROC " << fmt(summary.auroc) << "  AUPRC " << fmt(summary.auprc) << "\n"
            << "results in " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::string image;
  std::string out_dir;
  int stride = 16;
  int scan_batch = 4;
};

void setup_infer(CLI::App& app, InferArgs& args) {
  app.add_option("--checkpoint", args.checkpoint, "model checkpoint (.icad)")->required();
  app.add_option("--image", args.image, "input image (.png or .pgm)")->required();
  app.add_option("--out", args.out_dir, "output directory")->required();
  app.add_option("--stride", args.stride, "scan stride in pixels");
  app.add_option("--scan-batch", args.scan_batch, "windows per forward pass");
}

int cmd_infer(const InferArgs& args) {
  LoadedModel model = load_model(args.checkpoint);
  ScanParams params = make_scan_params(args.stride, args.scan_batch);

  GrayImage raw = read_gray_image(args.image);
  if (raw.width < params.mask.patch || raw.height < params.mask.patch)
    throw data_error("infer: image is " + std::to_string(raw.width) + "x" +
                     std::to_string(raw.height) + "; the scan window needs at least " +
                     std::to_string(params.mask.patch) + " pixels per side");
  SurfaceImage img;
  img.width = raw.width;
  img.height = raw.height;
  img.pixels = to_normalized(raw);
  img.name = fs::path(args.image).filename().string();

  ScanStats stats;
  AnomalyMap map = scan_image(img, model.reconstruct, params, &stats);

  const fs::path out = resolve_out(args.out_dir);
  fs::create_directories(out);
  const std::string stem = fs::path(args.image).stem().string();
  write_map_files(out, stem, map);

  std::cout << "scanned " << stats.patches << " windows in " << fmt(stats.seconds) << " s ("
            << fmt(stats.patches_per_second) << " windows/s)\n"
            << "wrote " << (out / (stem + ".amap")).string() << " and "
            << (out / (stem + ".png")).string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec_file;
  std::string out_dir;
  bool force = false;
};

void setup_synth(CLI::App& app, SynthArgs& args) {
  app.add_option("--spec", args.spec_file, "texture settings file (key = value lines)");
  app.add_option("--out", args.out_dir, "dataset output directory")->required();
  app.add_flag("--force", args.force, "write into an existing non-empty directory");
}

int cmd_synth(const SynthArgs& args) {
  SynthJob job = args.spec_file.empty() ? SynthJob{} : load_synth_job(args.spec_file);
  const fs::path out = resolve_out(args.out_dir);
  if (fs::exists(out) && !fs::is_empty(out) && !args.force)
    throw config_error("synth: " + out.string() + " exists and is not empty (use --force)");

  write_synthetic_dataset(job, out);
  std::ofstream spec_copy(out / "spec.txt", std::ios::binary | std::ios::trunc);
  spec_copy << serialize_synth_job(job);

  std::cout << "wrote " << job.n_train << " train + " << job.n_val << " val + " << job.n_test
            << " test images to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface anomaly detection by masked image completion"};
  app.require_subcommand(1);

  TrainArgs train_args;
  EvalArgs eval_args;
  InferArgs infer_args;
  SynthArgs synth_args;

  CLI::App* train = app.add_subcommand("train", "train a model on fault-free images");
  setup_train(*train, train_args);
  CLI::App* eval = app.add_subcommand("eval", "score labeled test images and report metrics");
  setup_eval(*eval, eval_args);
  CLI::App* infer = app.add_subcommand("infer", "produce an anomaly map for one image");
  setup_infer(*infer, infer_args);
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
  setup_synth(*synth, synth_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (infer->parsed()) return cmd_infer(infer_args);
    return cmd_synth(synth_args);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
