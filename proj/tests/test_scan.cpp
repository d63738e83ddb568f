#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "icad/rng.hpp"
#include "icad/scan.hpp"

using namespace icad;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "icad_test_scan";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

SurfaceImage random_image(int n, uint64_t seed) {
  SurfaceImage img;
  img.width = img.height = n;
  img.pixels.resize(img.size());
  Rng rng(seed);
  for (auto& v : img.pixels) v = float(rng.uniform(-0.95, 0.95));
  return img;
}

// Stub models with exactly known outputs.
const Reconstructor identity_model = [](std::span<const float> p, int) {
  return std::vector<float>(p.begin(), p.end());
};
const Reconstructor zero_model = [](std::span<const float> p, int) {
  return std::vector<float>(p.size(), 0.0f);
};

// A small but structurally complete completion network (strided stage,
// dilated stage, upscale, linear head, clip).
CompletionNetT<float> make_mini_net(uint64_t seed) {
  const std::vector<LayerSpec> spec = {conv_layer(3, 1, 1, 2), conv_layer(3, 1, 2, 3),
                                       conv_layer(3, 2, 1, 3), {LayerSpec::Kind::Upscale},
                                       conv_layer(3, 1, 1, 1, false), {LayerSpec::Kind::Clip}};
  Rng rng(seed);
  return CompletionNetT<float>::build(spec, rng, 0.2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Window geometry
// ---------------------------------------------------------------------------

TEST_CASE("window positions follow the stride with a clamped final window") {
  CHECK(window_positions(128, 128, 16) == std::vector<int>{0});
  CHECK(window_positions(160, 128, 16) == std::vector<int>{0, 16, 32});
  CHECK(window_positions(161, 128, 16) == std::vector<int>{0, 16, 32, 33});
  CHECK(window_positions(256, 128, 16) ==
        std::vector<int>{0, 16, 32, 48, 64, 80, 96, 112, 128});
  CHECK(window_positions(130, 128, 16) == std::vector<int>{0, 2});
  CHECK_THROWS_AS(window_positions(127, 128, 16), std::invalid_argument);
}

TEST_CASE("a single-window image is scored only in its central block") {
  const SurfaceImage img = random_image(128, 3);
  ScanStats stats;
  const AnomalyMap map = scan_image(img, identity_model, {}, &stats);
  CHECK(stats.patches == 1);
  CHECK(map.width == 128);
  CHECK(map.height == 128);
  int covered = 0, outside_marked = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const bool in_block = x >= 52 && x <= 75 && y >= 52 && y <= 75;
      if (map.scored(x, y)) ++covered;
      if (!in_block && (map.coverage[size_t(y) * 128 + x] != 0 ||
                        !std::isnan(map.at(x, y))))
        ++outside_marked;
    }
  CHECK(covered == 24 * 24);
  CHECK(outside_marked == 0);
}

TEST_CASE("a 160x160 image produces the 3x3 window grid") {
  const SurfaceImage img = random_image(160, 4);
  ScanStats stats;
  const AnomalyMap map = scan_image(img, identity_model, {}, &stats);
  CHECK(stats.patches == 9);

  // Coverage must equal the block union computed from the documented window
  // rule: blocks of 24 starting at window origin + 52.
  int mismatches = 0;
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 160; ++x) {
      uint32_t want = 0;
      for (int y0 : {0, 16, 32})
        for (int x0 : {0, 16, 32}) {
          const bool inx = x >= x0 + 52 && x <= x0 + 75;
          const bool iny = y >= y0 + 52 && y <= y0 + 75;
          if (inx && iny) ++want;
        }
      if (map.coverage[size_t(y) * 160 + x] != want) ++mismatches;
    }
  CHECK(mismatches == 0);
  // Overlap sanity: block starts 16 apart, blocks 24 wide, so strips overlap.
  CHECK(map.coverage[size_t(70) * 160 + 70] == 4);
  CHECK(map.coverage[size_t(60) * 160 + 60] == 1);
}

TEST_CASE("scores equal the reconstruction error at each scored pixel") {
  // With a zero reconstruction the score of a pixel is |pixel| in every
  // window, so the max-merge must reproduce |pixel| exactly.
  const SurfaceImage img = random_image(160, 5);
  const AnomalyMap map = scan_image(img, zero_model);
  int checked = 0, wrong = 0;
  for (int y = 0; y < 160; ++y)
    for (int x = 0; x < 160; ++x)
      if (map.scored(x, y)) {
        ++checked;
        if (map.at(x, y) != std::abs(img.pixels[size_t(y) * 160 + x])) ++wrong;
      }
  CHECK(checked > 0);
  CHECK(wrong == 0);

  // An identity reconstruction scores zero everywhere scored.
  const AnomalyMap zero_map = scan_image(img, identity_model);
  int nonzero = 0;
  for (size_t i = 0; i < zero_map.size(); ++i)
    if (zero_map.coverage[i] > 0 && zero_map.scores[i] != 0.0f) ++nonzero;
  CHECK(nonzero == 0);
}

TEST_CASE("interior defects up to 8x8 always fit inside one scoring block") {
  // Exhaustive enumeration on the 256x256 benchmark grid. First verify the
  // scanner's coverage equals the union of the blocks derived from the
  // documented window rule, then check containment against those blocks.
  const int n = 256, patch = 128, stride = 16, start = 52, block = 24;
  const SurfaceImage img = random_image(n, 6);
  const AnomalyMap map = scan_image(img, zero_model);

  std::vector<int> origins;
  for (int x = 0; x + patch <= n; x += stride) origins.push_back(x);
  if (origins.back() != n - patch) origins.push_back(n - patch);

  std::vector<uint32_t> want(size_t(n) * n, 0);
  for (int y0 : origins)
    for (int x0 : origins)
      for (int by = 0; by < block; ++by)
        for (int bx = 0; bx < block; ++bx)
          ++want[size_t(y0 + start + by) * n + (x0 + start + bx)];
  CHECK(std::memcmp(want.data(), map.coverage.data(), want.size() * 4) == 0);

  // Scannable interior = scored pixels; on this grid that is [52, 203]^2.
  CHECK(map.scored(52, 52));
  CHECK(map.scored(203, 203));
  CHECK(!map.scored(51, 60));
  CHECK(!map.scored(204, 60));

  // Containment: for every defect edge 1..8 and every position whose
  // bounding box lies inside the scored interior, one block contains it.
  const auto axis_contained = [&](int lo, int len) {
    for (int o : origins) {
      const int b0 = o + start;
      if (b0 <= lo && lo + len - 1 <= b0 + block - 1) return true;
    }
    return false;
  };
  for (int edge = 1; edge <= 8; ++edge) {
    int misses = 0;
    for (int c = 52; c + edge - 1 <= 203; ++c)
      if (!axis_contained(c, edge)) ++misses;
    CHECK_MESSAGE(misses == 0, "edge ", edge);
  }
  // The guarantee is per-axis separable; spot-check the 2D claim directly.
  int misses_2d = 0;
  for (int y = 52; y + 7 <= 203; ++y)
    for (int x = 52; x + 7 <= 203; ++x) {
      bool found = false;
      for (int y0 : origins) {
        if (found) break;
        const int by0 = y0 + start;
        if (!(by0 <= y && y + 7 <= by0 + block - 1)) continue;
        for (int x0 : origins) {
          const int bx0 = x0 + start;
          if (bx0 <= x && x + 7 <= bx0 + block - 1) {
            found = true;
            break;
          }
        }
      }
      if (!found) ++misses_2d;
    }
  CHECK(misses_2d == 0);
  // Tightness: a 9-px edge still always fits (start slack 24-9+1 = 16 matches
  // the stride), a 10-px edge misses somewhere.
  int nine_misses = 0;
  bool ten_fails_somewhere = false;
  for (int c = 52; c + 8 <= 203; ++c)
    if (!axis_contained(c, 9)) ++nine_misses;
  for (int c = 52; c + 9 <= 203; ++c)
    if (!axis_contained(c, 10)) ten_fails_somewhere = true;
  CHECK(nine_misses == 0);
  CHECK(ten_fails_somewhere);
}

// ---------------------------------------------------------------------------
// Model integration
// ---------------------------------------------------------------------------

TEST_CASE("batched scanning equals window-by-window scanning bitwise") {
  const auto net = make_mini_net(11);
  const Reconstructor model = completion_reconstructor(net);
  const SurfaceImage img = random_image(160, 7);

  ScanParams one;
  one.batch = 1;
  ScanParams four;
  four.batch = 4;
  ScanParams nine;
  nine.batch = 9;
  const AnomalyMap a = scan_image(img, model, one);
  const AnomalyMap b = scan_image(img, model, four);
  const AnomalyMap c = scan_image(img, model, nine);
  CHECK(std::memcmp(a.scores.data(), b.scores.data(), a.size() * 4) == 0);
  CHECK(std::memcmp(a.scores.data(), c.scores.data(), a.size() * 4) == 0);
  CHECK(a.coverage == b.coverage);
}

TEST_CASE("scanning with the completion model matches a hand-rolled pipeline") {
  const auto net = make_mini_net(13);
  const SurfaceImage img = random_image(160, 8);
  const AnomalyMap map = scan_image(img, completion_reconstructor(net));

  // Independent reimplementation: crop each window, mask it, run the net,
  // take |patch - recon| on the centered 24x24, merge by max.
  const MaskSpec mask;
  std::vector<float> want(img.size(), -1.0f);
  for (int y0 : {0, 16, 32})
    for (int x0 : {0, 16, 32}) {
      std::vector<float> patch(128 * 128);
      for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
          patch[size_t(y) * 128 + x] = img.pixels[size_t(y0 + y) * 160 + (x0 + x)];
      std::vector<float> masked = patch;
      apply_mask_inplace(masked, mask);
      Tensor t = Tensor::from_values({1, 1, 128, 128}, masked);
      const Tensor recon = net.forward(t);
      for (int by = 0; by < 24; ++by)
        for (int bx = 0; bx < 24; ++bx) {
          const size_t in_patch = size_t(52 + by) * 128 + 52 + bx;
          const float s = std::abs(patch[in_patch] - recon.values()[in_patch]);
          const size_t at = size_t(y0 + 52 + by) * 160 + (x0 + 52 + bx);
          want[at] = std::max(want[at], s);
        }
    }
  int mismatches = 0;
  for (size_t i = 0; i < img.size(); ++i) {
    if (want[i] < 0.0f) {
      if (map.coverage[i] != 0) ++mismatches;
    } else if (map.scores[i] != want[i]) {
      ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("scanning twice yields identical maps") {
  const auto net = make_mini_net(17);
  const Reconstructor model = completion_reconstructor(net);
  const SurfaceImage img = random_image(130, 9);
  const AnomalyMap a = scan_image(img, model);
  const AnomalyMap b = scan_image(img, model);
  CHECK(std::memcmp(a.scores.data(), b.scores.data(), a.size() * 4) == 0);
  CHECK(a.coverage == b.coverage);
}

TEST_CASE("scan statistics report throughput") {
  const SurfaceImage img = random_image(160, 10);
  ScanStats stats;
  scan_image(img, identity_model, {}, &stats);
  CHECK(stats.patches == 9);
  CHECK(stats.seconds >= 0.0);
  if (stats.seconds > 0.0)
    CHECK(stats.patches_per_second ==
          doctest::Approx(9.0 / stats.seconds).epsilon(1e-12));
}

TEST_CASE("score_patch scores the centered block of one patch") {
  std::vector<float> patch(128 * 128);
  Rng rng(21);
  for (auto& v : patch) v = float(rng.uniform(-1.0, 1.0));
  const std::vector<float> scores = score_patch(patch, zero_model);
  REQUIRE(scores.size() == 24u * 24u);
  int wrong = 0;
  for (int by = 0; by < 24; ++by)
    for (int bx = 0; bx < 24; ++bx)
      if (scores[size_t(by) * 24 + bx] != std::abs(patch[size_t(52 + by) * 128 + 52 + bx]))
        ++wrong;
  CHECK(wrong == 0);

  std::vector<float> short_patch(100);
  CHECK_THROWS_AS(score_patch(short_patch, zero_model), std::invalid_argument);
}

TEST_CASE("scan parameter validation") {
  const SurfaceImage small = random_image(100, 22);
  CHECK_THROWS_AS(scan_image(small, identity_model), std::invalid_argument);

  const SurfaceImage img = random_image(128, 23);
  ScanParams bad;
  bad.stride = 0;
  CHECK_THROWS_AS(scan_image(img, identity_model, bad), std::invalid_argument);
  bad = {};
  bad.batch = 0;
  CHECK_THROWS_AS(scan_image(img, identity_model, bad), std::invalid_argument);
  bad = {};
  bad.score_block = 40;  // larger than the 32 hole
  CHECK_THROWS_AS(scan_image(img, identity_model, bad), std::invalid_argument);
  bad = {};
  bad.score_block = 23;  // cannot center a 23 block in a 128 patch
  CHECK_THROWS_AS(scan_image(img, identity_model, bad), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

TEST_CASE("anomaly-map files round trip bitwise") {
  const SurfaceImage img = random_image(160, 24);
  const AnomalyMap map = scan_image(img, zero_model);
  const fs::path p = scratch_dir() / "map.amap";
  write_anomaly_map(p, map);
  const AnomalyMap back = read_anomaly_map(p);
  CHECK(back.width == map.width);
  CHECK(back.height == map.height);
  CHECK(std::memcmp(back.scores.data(), map.scores.data(), map.size() * 4) == 0);
  int coverage_mismatch = 0;
  for (size_t i = 0; i < map.size(); ++i) {
    const uint32_t want = map.coverage[i] > 0 ? 1u : 0u;
    if (back.coverage[i] != want) ++coverage_mismatch;
  }
  CHECK(coverage_mismatch == 0);

  // Writing the re-read map reproduces the file bytes.
  const fs::path q = scratch_dir() / "map2.amap";
  write_anomaly_map(q, back);
  std::ifstream fa(p, std::ios::binary), fb(q, std::ios::binary);
  const std::vector<char> ba{std::istreambuf_iterator<char>(fa), {}};
  const std::vector<char> bb{std::istreambuf_iterator<char>(fb), {}};
  CHECK(ba == bb);
}

TEST_CASE("anomaly-map file layout is exactly as documented") {
  AnomalyMap map;
  map.width = 2;
  map.height = 1;
  map.scores = {0.5f, std::numeric_limits<float>::quiet_NaN()};
  map.coverage = {1, 0};
  const fs::path p = scratch_dir() / "layout.amap";
  write_anomaly_map(p, map);

  std::ifstream f(p, std::ios::binary);
  const std::vector<uint8_t> bytes{std::istreambuf_iterator<char>(f), {}};
  REQUIRE(bytes.size() == 16u + 8u);
  CHECK(std::memcmp(bytes.data(), "AMAP", 4) == 0);
  CHECK(bytes[4] == 1);  // version 1, little endian
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == 1);   // height
  CHECK(bytes[12] == 2);  // width
  // 0.5f little endian = 00 00 00 3f
  CHECK(bytes[16] == 0x00);
  CHECK(bytes[17] == 0x00);
  CHECK(bytes[18] == 0x00);
  CHECK(bytes[19] == 0x3f);
}

TEST_CASE("anomaly-map reader rejects malformed files") {
  const fs::path p = scratch_dir() / "bad.amap";
  std::ofstream(p, std::ios::binary) << "AMXP\x01\x00\x00\x00";
  CHECK_THROWS_AS(read_anomaly_map(p), data_error);

  AnomalyMap map;
  map.width = 4;
  map.height = 4;
  map.scores.assign(16, 1.0f);
  map.coverage.assign(16, 1);
  write_anomaly_map(p, map);
  std::ifstream in(p, std::ios::binary);
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), {}};
  in.close();

  std::vector<char> wrong_version = bytes;
  wrong_version[4] = 9;
  std::ofstream(p, std::ios::binary).write(wrong_version.data(), std::streamsize(wrong_version.size()));
  CHECK_THROWS_AS(read_anomaly_map(p), data_error);

  std::vector<char> truncated(bytes.begin(), bytes.end() - 4);
  std::ofstream(p, std::ios::binary).write(truncated.data(), std::streamsize(truncated.size()));
  CHECK_THROWS_AS(read_anomaly_map(p), data_error);

  CHECK_THROWS_AS(read_anomaly_map(scratch_dir() / "nope.amap"), data_error);
}

TEST_CASE("visualization normalizes scored pixels onto the full byte range") {
  AnomalyMap map;
  map.width = 4;
  map.height = 1;
  map.scores = {std::numeric_limits<float>::quiet_NaN(), 0.0f, 1.0f, 2.0f};
  map.coverage = {0, 1, 1, 1};
  const GrayImage img = anomaly_map_to_image(map);
  CHECK(img.pixels == std::vector<uint8_t>{0, 0, 128, 255});

  // Constant or empty maps render black.
  map.scores = {std::numeric_limits<float>::quiet_NaN(), 0.7f, 0.7f, 0.7f};
  CHECK(anomaly_map_to_image(map).pixels == std::vector<uint8_t>{0, 0, 0, 0});
  map.coverage = {0, 0, 0, 0};
  CHECK(anomaly_map_to_image(map).pixels == std::vector<uint8_t>{0, 0, 0, 0});
}
