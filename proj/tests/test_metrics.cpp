#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "icad/metrics.hpp"
#include "icad/rng.hpp"

using namespace icad;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "icad_test_metrics";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Pairwise Mann-Whitney statistic: fraction of (positive, negative) pairs
// ranked correctly, ties worth one half.
double u_statistic(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  double u = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        u += 1.0;
      else if (scores[i] == scores[j])
        u += 0.5;
    }
  }
  return u / double(pairs);
}

// Exhaustive-threshold PR oracle: recount true/false positives from scratch
// at every distinct score, then integrate step-wise.
double ap_oracle(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  std::set<float, std::greater<float>> thresholds(scores.begin(), scores.end());
  int64_t total_pos = 0;
  for (uint8_t l : labels) total_pos += l;
  double ap = 0.0, prev_recall = 0.0;
  for (float t : thresholds) {
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i])
          ++tp;
        else
          ++fp;
      }
    }
    const double recall = double(tp) / double(total_pos);
    ap += (recall - prev_recall) * (double(tp) / double(tp + fp));
    prev_recall = recall;
  }
  return ap;
}

// Random scores on a coarse grid so cross-label ties actually happen.
void random_tied_data(uint64_t seed, size_t n, double pos_fraction,
                      std::vector<float>& scores, std::vector<uint8_t>& labels) {
  Rng rng(seed);
  scores.clear();
  labels.clear();
  for (size_t i = 0; i < n; ++i) {
    const uint8_t l = rng.uniform() < pos_fraction ? 1 : 0;
    // Positives biased upward, quantized to tenths.
    const double raw = rng.uniform() + (l ? 0.3 : 0.0);
    scores.push_back(float(std::round(raw * 10.0) / 10.0));
    labels.push_back(l);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

TEST_CASE("perfect separation scores a full area") {
  const std::vector<float> s{0.0f, 0.0f, 1.0f, 1.0f, 1.0f};
  const std::vector<uint8_t> l{0, 0, 1, 1, 1};
  CHECK(roc_curve(s, l).auc == 1.0);
  CHECK(pr_curve(s, l).auc == 1.0);
  // Inverted scores give the mirror area.
  const std::vector<float> inv{1.0f, 1.0f, 0.0f, 0.0f, 0.0f};
  CHECK(roc_curve(inv, l).auc == 0.0);
}

TEST_CASE("constant scores land on the tie diagonal") {
  const std::vector<float> s(8, 0.25f);
  const std::vector<uint8_t> l{1, 0, 0, 1, 0, 0, 0, 1};
  CHECK(roc_curve(s, l).auc == 0.5);
  CHECK(pr_curve(s, l).auc == doctest::Approx(3.0 / 8.0).epsilon(1e-15));
}

TEST_CASE("trapezoidal area equals the pairwise statistic on random tied data") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::vector<float> scores;
    std::vector<uint8_t> labels;
    random_tied_data(seed, 1000, 0.1 + 0.15 * double(seed), scores, labels);
    const EvalCurve curve = roc_curve(scores, labels);
    const double want = u_statistic(scores, labels);
    CHECK_MESSAGE(std::abs(curve.auc - want) < 1e-9, "seed ", seed);
  }
}

TEST_CASE("ROC points run monotonically from the origin to (1,1)") {
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  random_tied_data(11, 400, 0.3, scores, labels);
  const EvalCurve c = roc_curve(scores, labels);
  REQUIRE(c.points.size() >= 2u);
  CHECK(c.points.front().x == 0.0);
  CHECK(c.points.front().y == 0.0);
  CHECK(c.points.back().x == 1.0);
  CHECK(c.points.back().y == 1.0);
  int violations = 0;
  double trapezoid = 0.0;
  for (size_t i = 1; i < c.points.size(); ++i) {
    if (c.points[i].x < c.points[i - 1].x || c.points[i].y < c.points[i - 1].y) ++violations;
    if (c.points[i].threshold >= c.points[i - 1].threshold) ++violations;
    trapezoid += (c.points[i].x - c.points[i - 1].x) *
                 (c.points[i].y + c.points[i - 1].y) / 2.0;
  }
  CHECK(violations == 0);
  // The stored area is the trapezoidal integral of the stored points.
  CHECK(std::abs(c.auc - trapezoid) < 1e-15);
}

// ---------------------------------------------------------------------------
// PR
// ---------------------------------------------------------------------------

TEST_CASE("a small mixed-tie instance matches the exhaustive threshold oracle") {
  const std::vector<float> scores{0.9f, 0.8f, 0.8f, 0.7f, 0.6f, 0.6f, 0.6f, 0.4f, 0.2f, 0.2f};
  const std::vector<uint8_t> labels{1, 1, 0, 0, 1, 0, 1, 0, 1, 0};
  const EvalCurve c = pr_curve(scores, labels);
  CHECK(std::abs(c.auc - ap_oracle(scores, labels)) < 1e-9);

  // Point-by-point against the oracle's recount, skipping the anchor.
  std::set<float, std::greater<float>> thresholds(scores.begin(), scores.end());
  REQUIRE(c.points.size() == thresholds.size() + 1);
  size_t k = 1;
  for (float t : thresholds) {
    int64_t tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) (labels[i] ? tp : fp) += 1;
    CHECK(c.points[k].threshold == double(t));
    CHECK(c.points[k].x == doctest::Approx(tp / 5.0).epsilon(1e-15));
    CHECK(c.points[k].y == doctest::Approx(double(tp) / double(tp + fp)).epsilon(1e-15));
    ++k;
  }
}

TEST_CASE("random instances match the exhaustive threshold oracle") {
  for (uint64_t seed : {21u, 22u, 23u}) {
    std::vector<float> scores;
    std::vector<uint8_t> labels;
    random_tied_data(seed, 300, 0.2, scores, labels);
    const EvalCurve c = pr_curve(scores, labels);
    CHECK_MESSAGE(std::abs(c.auc - ap_oracle(scores, labels)) < 1e-9, "seed ", seed);
    // Stored area is the step-wise integral of the stored points.
    double step = 0.0;
    for (size_t i = 1; i < c.points.size(); ++i)
      step += (c.points[i].x - c.points[i - 1].x) * c.points[i].y;
    CHECK(std::abs(c.auc - step) < 1e-15);
  }
}

TEST_CASE("PR handles an all-positive sample") {
  const std::vector<float> s{0.1f, 0.5f, 0.9f};
  const std::vector<uint8_t> l{1, 1, 1};
  CHECK(pr_curve(s, l).auc == 1.0);  // precision is 1 at every threshold
}

// ---------------------------------------------------------------------------
// Shared properties
// ---------------------------------------------------------------------------

TEST_CASE("strictly increasing score transforms leave both curves unchanged") {
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  random_tied_data(31, 500, 0.25, scores, labels);
  std::vector<float> warped(scores.size());
  for (size_t i = 0; i < scores.size(); ++i)
    warped[i] = std::exp(2.0f * scores[i]) + 3.0f;

  const EvalCurve r0 = roc_curve(scores, labels), r1 = roc_curve(warped, labels);
  const EvalCurve p0 = pr_curve(scores, labels), p1 = pr_curve(warped, labels);
  CHECK(r0.auc == r1.auc);
  CHECK(p0.auc == p1.auc);
  REQUIRE(r0.points.size() == r1.points.size());
  REQUIRE(p0.points.size() == p1.points.size());
  int mismatches = 0;
  for (size_t i = 0; i < r0.points.size(); ++i)
    if (r0.points[i].x != r1.points[i].x || r0.points[i].y != r1.points[i].y) ++mismatches;
  for (size_t i = 0; i < p0.points.size(); ++i)
    if (p0.points[i].x != p1.points[i].x || p0.points[i].y != p1.points[i].y) ++mismatches;
  CHECK(mismatches == 0);
}

TEST_CASE("negating scores and swapping labels preserves the ROC area") {
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  random_tied_data(41, 600, 0.4, scores, labels);
  std::vector<float> neg(scores.size());
  std::vector<uint8_t> swapped(labels.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    neg[i] = -scores[i];
    swapped[i] = labels[i] ? 0 : 1;
  }
  CHECK(std::abs(roc_curve(scores, labels).auc - roc_curve(neg, swapped).auc) < 1e-12);
}

TEST_CASE("degenerate label sets raise the undefined-metric error") {
  const std::vector<float> s{0.1f, 0.2f, 0.3f};
  CHECK_THROWS_AS(roc_curve(s, std::vector<uint8_t>{1, 1, 1}), undefined_metric_error);
  CHECK_THROWS_AS(roc_curve(s, std::vector<uint8_t>{0, 0, 0}), undefined_metric_error);
  CHECK_THROWS_AS(pr_curve(s, std::vector<uint8_t>{0, 0, 0}), undefined_metric_error);
  CHECK_THROWS_AS(roc_curve({}, {}), undefined_metric_error);
}

TEST_CASE("malformed inputs raise invalid-argument errors") {
  const std::vector<float> s{0.1f, 0.2f};
  CHECK_THROWS_AS(roc_curve(s, std::vector<uint8_t>{1}), std::invalid_argument);
  CHECK_THROWS_AS(roc_curve(s, std::vector<uint8_t>{1, 2}), std::invalid_argument);
  const std::vector<float> with_nan{0.1f, std::numeric_limits<float>::quiet_NaN()};
  CHECK_THROWS_AS(roc_curve(with_nan, std::vector<uint8_t>{1, 0}), std::invalid_argument);
  const std::vector<float> with_inf{0.1f, std::numeric_limits<float>::infinity()};
  CHECK_THROWS_AS(pr_curve(with_inf, std::vector<uint8_t>{1, 0}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Map-to-samples plumbing
// ---------------------------------------------------------------------------

TEST_CASE("scored pixels are collected and unscored positives counted") {
  AnomalyMap map;
  map.width = 2;
  map.height = 2;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  map.scores = {0.3f, nan, 0.7f, nan};
  map.coverage = {1, 0, 2, 0};
  const std::vector<uint8_t> labels{1, 1, 0, 0};

  const PixelSamples ps = collect_scored_pixels(map, labels);
  CHECK(ps.scores == std::vector<float>{0.3f, 0.7f});
  CHECK(ps.labels == std::vector<uint8_t>{1, 0});
  CHECK(ps.excluded_pixels == 2);
  CHECK(ps.excluded_positives == 1);

  PixelSamples acc = ps;
  append_scored_pixels(acc, map, labels);
  CHECK(acc.scores.size() == 4u);
  CHECK(acc.excluded_pixels == 4);
  CHECK(acc.excluded_positives == 2);

  CHECK_THROWS_AS(collect_scored_pixels(map, std::vector<uint8_t>{1, 0}),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Export formats
// ---------------------------------------------------------------------------

TEST_CASE("curve CSV layout") {
  const std::vector<float> s{1.0f, 0.5f, 0.5f, 0.0f};
  const std::vector<uint8_t> l{1, 1, 0, 0};
  const fs::path p = scratch_dir() / "roc.csv";
  write_curve_csv(p, roc_curve(s, l));
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() ==
        "threshold,fpr,tpr\n"
        "inf,0,0\n"
        "1,0,0.5\n"
        "0.5,0.5,1\n"
        "0,1,1\n");

  const fs::path q = scratch_dir() / "pr.csv";
  write_curve_csv(q, pr_curve(s, l));
  std::ifstream g(q);
  std::stringstream tt;
  tt << g.rdbuf();
  CHECK(tt.str().starts_with("threshold,recall,precision\ninf,0,1\n1,0.5,1\n"));
}

TEST_CASE("evaluation summary serializes to a parseable JSON object") {
  EvalSummary sum;
  sum.auroc = 0.9375;
  sum.auprc = 0.8125;
  sum.positives = 17;
  sum.negatives = 4000;
  sum.excluded_pixels = 23;
  const fs::path p = scratch_dir() / "summary.json";
  write_eval_summary(p, sum);

  std::ifstream f(p);
  const nlohmann::json j = nlohmann::json::parse(f);
  CHECK(j.at("auroc").get<double>() == 0.9375);
  CHECK(j.at("auprc").get<double>() == 0.8125);
  CHECK(j.at("positives").get<int64_t>() == 17);
  CHECK(j.at("negatives").get<int64_t>() == 4000);
  CHECK(j.at("excluded_pixels").get<int64_t>() == 23);
}
