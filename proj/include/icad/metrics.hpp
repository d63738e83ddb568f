#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "icad/errors.hpp"
#include "icad/scan.hpp"

namespace icad {

// One operating point of an evaluation curve. For ROC curves x is the false
// positive rate and y the true positive rate; for PR curves x is recall and
// y precision. `threshold` is the smallest score still classified anomalous
// at this point (+infinity for the leading anchor point).
struct CurvePoint {
  double threshold;
  double x;
  double y;
};

struct EvalCurve {
  enum class Kind { ROC, PR };
  Kind kind;
  std::vector<CurvePoint> points;
  double auc = 0.0;
};

// Threshold sweep over the distinct score values, ties grouped so equal
// scores flip together. The area equals the trapezoidal integral of the
// stored points, which for ROC matches the Mann-Whitney U statistic over
// (positive, negative) pairs with ties counted half.
EvalCurve roc_curve(std::span<const float> scores, std::span<const uint8_t> labels);

// Same sweep; the area uses step-wise (right-continuous) interpolation:
// sum over points of (recall_i - recall_{i-1}) * precision_i.
EvalCurve pr_curve(std::span<const float> scores, std::span<const uint8_t> labels);

// Scored pixels of an anomaly map paired with their ground-truth labels.
// Unscored pixels are excluded; how many of them were labeled defective is
// reported so callers can warn about coverage.
struct PixelSamples {
  std::vector<float> scores;
  std::vector<uint8_t> labels;
  int64_t excluded_pixels = 0;
  int64_t excluded_positives = 0;
};

PixelSamples collect_scored_pixels(const AnomalyMap& map, std::span<const uint8_t> labels);
// Appends another map's scored pixels (multi-image evaluation).
void append_scored_pixels(PixelSamples& into, const AnomalyMap& map,
                          std::span<const uint8_t> labels);

struct EvalSummary {
  double auroc = 0.0;
  double auprc = 0.0;
  int64_t positives = 0;
  int64_t negatives = 0;
  int64_t excluded_pixels = 0;
};

// CSV export: "threshold,<x>,<y>" header, one row per curve point.
void write_curve_csv(const std::filesystem::path& path, const EvalCurve& curve);

// JSON object {auroc, auprc, positives, negatives, excluded_pixels}.
void write_eval_summary(const std::filesystem::path& path, const EvalSummary& summary);

}  // namespace icad
