#include "icad/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace icad {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw config_error("config: bad value '" + value + "' for key '" + key + "'");
}

float parse_float(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + value.size() || value.empty()) bad_value(key, value);
  return float(v);
}

int64_t parse_i64(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  long long v = std::strtoll(begin, &end, 10);
  if (end != begin + value.size() || value.empty()) bad_value(key, value);
  return int64_t(v);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') bad_value(key, value);
  const char* begin = value.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(begin, &end, 10);
  if (end != begin + value.size() || value.empty()) bad_value(key, value);
  return uint64_t(v);
}

int parse_int(const std::string& key, const std::string& value) {
  int64_t v = parse_i64(key, value);
  if (v < INT32_MIN || v > INT32_MAX) bad_value(key, value);
  return int(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::string format_float(float v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", double(v));
  return buf;
}

// Walks "key = value" lines and dispatches each pair through `apply`.
void parse_kv(const std::string& text,
              const std::function<void(const std::string&, const std::string&)>& apply) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config: line " + std::to_string(lineno) +
                         " is not 'key = value': '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error("config: empty key on line " + std::to_string(lineno));
    apply(key, value);
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("config: cannot open " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

}  // namespace

AugmentConfig RunConfig::augment() const {
  AugmentConfig aug;
  aug.rotate = aug_rotate;
  aug.flip = aug_flip;
  aug.scale = aug_scale;
  aug.brightness = aug_brightness;
  return aug;
}

void RunConfig::validate() const {
  if (model != "canonical" && model != "desk" && model != "autoencoder")
    throw config_error("config: model must be canonical, desk, or autoencoder; got '" + model +
                       "'");
  if (!(lambda >= 0.0f && lambda <= 1.0f)) throw config_error("config: lambda must be in [0, 1]");
  if (!(alpha > 0.0f)) throw config_error("config: alpha must be positive");
  if (!(beta1 >= 0.0f && beta1 < 1.0f)) throw config_error("config: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0f && beta2 < 1.0f)) throw config_error("config: beta2 must be in [0, 1)");
  if (!(eps > 0.0f)) throw config_error("config: eps must be positive");
  if (!(sigma > 0.0f)) throw config_error("config: sigma must be positive");
  if (batch_size < 1) throw config_error("config: batch_size must be at least 1");
  if (batch_count < 0) throw config_error("config: batch_count must be non-negative");
  if (stride < 1) throw config_error("config: stride must be at least 1");
  if (scan_batch < 1) throw config_error("config: scan_batch must be at least 1");
  if (val_every < 1) throw config_error("config: val_every must be at least 1");
  if (val_patches < 1) throw config_error("config: val_patches must be at least 1");
  if (checkpoint_every < 1) throw config_error("config: checkpoint_every must be at least 1");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  parse_kv(text, [&](const std::string& key, const std::string& value) {
    if (key == "model") c.model = value;
    else if (key == "lambda") c.lambda = parse_float(key, value);
    else if (key == "alpha") c.alpha = parse_float(key, value);
    else if (key == "beta1") c.beta1 = parse_float(key, value);
    else if (key == "beta2") c.beta2 = parse_float(key, value);
    else if (key == "eps") c.eps = parse_float(key, value);
    else if (key == "sigma") c.sigma = parse_float(key, value);
    else if (key == "batch_size") c.batch_size = parse_int(key, value);
    else if (key == "batch_count") c.batch_count = parse_i64(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "aug_rotate") c.aug_rotate = parse_bool(key, value);
    else if (key == "aug_flip") c.aug_flip = parse_bool(key, value);
    else if (key == "aug_scale") c.aug_scale = parse_bool(key, value);
    else if (key == "aug_brightness") c.aug_brightness = parse_bool(key, value);
    else if (key == "train_dir") c.train_dir = value;
    else if (key == "val_dir") c.val_dir = value;
    else if (key == "test_dir") c.test_dir = value;
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "stride") c.stride = parse_int(key, value);
    else if (key == "scan_batch") c.scan_batch = parse_int(key, value);
    else if (key == "val_every") c.val_every = parse_int(key, value);
    else if (key == "val_patches") c.val_patches = parse_int(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = parse_int(key, value);
    else throw config_error("config: unknown key '" + key + "'");
  });
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "model = " << c.model << "\n"
      << "lambda = " << format_float(c.lambda) << "\n"
      << "alpha = " << format_float(c.alpha) << "\n"
      << "beta1 = " << format_float(c.beta1) << "\n"
      << "beta2 = " << format_float(c.beta2) << "\n"
      << "eps = " << format_float(c.eps) << "\n"
      << "sigma = " << format_float(c.sigma) << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "batch_count = " << c.batch_count << "\n"
      << "seed = " << c.seed << "\n"
      << "aug_rotate = " << (c.aug_rotate ? "true" : "false") << "\n"
      << "aug_flip = " << (c.aug_flip ? "true" : "false") << "\n"
      << "aug_scale = " << (c.aug_scale ? "true" : "false") << "\n"
      << "aug_brightness = " << (c.aug_brightness ? "true" : "false") << "\n"
      << "train_dir = " << c.train_dir << "\n"
      << "val_dir = " << c.val_dir << "\n"
      << "test_dir = " << c.test_dir << "\n"
      << "out_dir = " << c.out_dir << "\n"
      << "stride = " << c.stride << "\n"
      << "scan_batch = " << c.scan_batch << "\n"
      << "val_every = " << c.val_every << "\n"
      << "val_patches = " << c.val_patches << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n";
  return out.str();
}

std::filesystem::path resolved_out_dir(const RunConfig& config) {
  std::filesystem::path out = config.out_dir;
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("ICAD_OUT_ROOT"); root && *root)
    return std::filesystem::path(root) / out;
  return out;
}

SynthJob parse_synth_job(const std::string& text) {
  SynthJob j;
  parse_kv(text, [&](const std::string& key, const std::string& value) {
    if (key == "family") {
      if (value == "grid") j.texture.family = TextureSpec::Family::Grid;
      else if (value == "waves") j.texture.family = TextureSpec::Family::Waves;
      else bad_value(key, value);
    } else if (key == "period") j.texture.period = parse_float(key, value);
    else if (key == "orientation_deg") j.texture.orientation_deg = parse_float(key, value);
    else if (key == "distortion") j.texture.distortion = parse_float(key, value);
    else if (key == "brightness_jitter") j.texture.brightness_jitter = parse_float(key, value);
    else if (key == "noise") j.texture.noise = parse_float(key, value);
    else if (key == "image_size") j.texture.image_size = parse_int(key, value);
    else if (key == "defect_count_min") j.texture.defects.count_min = parse_int(key, value);
    else if (key == "defect_count_max") j.texture.defects.count_max = parse_int(key, value);
    else if (key == "defect_size_min") j.texture.defects.size_min = parse_float(key, value);
    else if (key == "defect_size_max") j.texture.defects.size_max = parse_float(key, value);
    else if (key == "defect_contrast_min")
      j.texture.defects.contrast_min = parse_float(key, value);
    else if (key == "defect_contrast_max")
      j.texture.defects.contrast_max = parse_float(key, value);
    else if (key == "n_train") j.n_train = parse_int(key, value);
    else if (key == "n_val") j.n_val = parse_int(key, value);
    else if (key == "n_test") j.n_test = parse_int(key, value);
    else if (key == "seed") j.seed = parse_u64(key, value);
    else throw config_error("config: unknown key '" + key + "'");
  });
  try {
    j.texture.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  if (j.n_train < 1 || j.n_val < 0 || j.n_test < 0)
    throw config_error("config: dataset sizes must have n_train >= 1 and n_val, n_test >= 0");
  return j;
}

SynthJob load_synth_job(const std::filesystem::path& path) {
  return parse_synth_job(read_text_file(path));
}

std::string serialize_synth_job(const SynthJob& j) {
  std::ostringstream out;
  out << "family = " << (j.texture.family == TextureSpec::Family::Grid ? "grid" : "waves") << "\n"
      << "period = " << format_float(j.texture.period) << "\n"
      << "orientation_deg = " << format_float(j.texture.orientation_deg) << "\n"
      << "distortion = " << format_float(j.texture.distortion) << "\n"
      << "brightness_jitter = " << format_float(j.texture.brightness_jitter) << "\n"
      << "noise = " << format_float(j.texture.noise) << "\n"
      << "image_size = " << j.texture.image_size << "\n"
      << "defect_count_min = " << j.texture.defects.count_min << "\n"
      << "defect_count_max = " << j.texture.defects.count_max << "\n"
      << "defect_size_min = " << format_float(j.texture.defects.size_min) << "\n"
      << "defect_size_max = " << format_float(j.texture.defects.size_max) << "\n"
      << "defect_contrast_min = " << format_float(j.texture.defects.contrast_min) << "\n"
      << "defect_contrast_max = " << format_float(j.texture.defects.contrast_max) << "\n"
      << "n_train = " << j.n_train << "\n"
      << "n_val = " << j.n_val << "\n"
      << "n_test = " << j.n_test << "\n"
      << "seed = " << j.seed << "\n";
  return out.str();
}

}  // namespace icad
