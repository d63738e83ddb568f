#include "icad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace icad {

namespace {

// Distinct score values in descending order with the number of positives and
// negatives at each value.
struct TieGroups {
  std::vector<double> value;
  std::vector<int64_t> pos, neg;
  int64_t total_pos = 0, total_neg = 0;
};

TieGroups group_by_score(std::span<const float> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("metrics: scores and labels differ in length");
  for (float s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("metrics: scores must be finite");
  for (uint8_t l : labels)
    if (l > 1) throw std::invalid_argument("metrics: labels must be 0 or 1");

  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), size_t(0));
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  TieGroups g;
  for (size_t k = 0; k < idx.size(); ++k) {
    const double s = double(scores[idx[k]]);
    if (g.value.empty() || s != g.value.back()) {
      g.value.push_back(s);
      g.pos.push_back(0);
      g.neg.push_back(0);
    }
    if (labels[idx[k]]) {
      ++g.pos.back();
      ++g.total_pos;
    } else {
      ++g.neg.back();
      ++g.total_neg;
    }
  }
  return g;
}

}  // namespace

EvalCurve roc_curve(std::span<const float> scores, std::span<const uint8_t> labels) {
  const TieGroups g = group_by_score(scores, labels);
  if (g.total_pos == 0 || g.total_neg == 0)
    throw undefined_metric_error(
        "ROC is undefined without both positive and negative labels");

  EvalCurve curve;
  curve.kind = EvalCurve::Kind::ROC;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  int64_t tp = 0, fp = 0;
  double auc = 0.0;
  for (size_t k = 0; k < g.value.size(); ++k) {
    const double x0 = double(fp) / double(g.total_neg);
    const double y0 = double(tp) / double(g.total_pos);
    tp += g.pos[k];
    fp += g.neg[k];
    const double x1 = double(fp) / double(g.total_neg);
    const double y1 = double(tp) / double(g.total_pos);
    auc += (x1 - x0) * (y0 + y1) / 2.0;
    curve.points.push_back({g.value[k], x1, y1});
  }
  curve.auc = auc;
  return curve;
}

EvalCurve pr_curve(std::span<const float> scores, std::span<const uint8_t> labels) {
  const TieGroups g = group_by_score(scores, labels);
  if (g.total_pos == 0)
    throw undefined_metric_error("the PR curve is undefined without positive labels");

  EvalCurve curve;
  curve.kind = EvalCurve::Kind::PR;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  int64_t tp = 0, fp = 0;
  double auc = 0.0, prev_recall = 0.0;
  for (size_t k = 0; k < g.value.size(); ++k) {
    tp += g.pos[k];
    fp += g.neg[k];
    const double recall = double(tp) / double(g.total_pos);
    const double precision = double(tp) / double(tp + fp);
    auc += (recall - prev_recall) * precision;
    prev_recall = recall;
    curve.points.push_back({g.value[k], recall, precision});
  }
  curve.auc = auc;
  return curve;
}

PixelSamples collect_scored_pixels(const AnomalyMap& map, std::span<const uint8_t> labels) {
  PixelSamples out;
  append_scored_pixels(out, map, labels);
  return out;
}

void append_scored_pixels(PixelSamples& into, const AnomalyMap& map,
                          std::span<const uint8_t> labels) {
  if (labels.size() != map.size())
    throw std::invalid_argument("collect_scored_pixels: label grid does not match the map");
  for (size_t i = 0; i < map.size(); ++i) {
    if (map.coverage[i] > 0) {
      into.scores.push_back(map.scores[i]);
      into.labels.push_back(labels[i] ? 1 : 0);
    } else {
      ++into.excluded_pixels;
      if (labels[i]) ++into.excluded_positives;
    }
  }
}

void write_curve_csv(const std::filesystem::path& path, const EvalCurve& curve) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw data_error("cannot create " + path.string());
  f << (curve.kind == EvalCurve::Kind::ROC ? "threshold,fpr,tpr\n"
                                           : "threshold,recall,precision\n");
  char row[128];
  for (const CurvePoint& p : curve.points) {
    std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g\n", p.threshold, p.x, p.y);
    f << row;
  }
  if (!f) throw data_error("write failed for " + path.string());
}

void write_eval_summary(const std::filesystem::path& path, const EvalSummary& summary) {
  nlohmann::json j{{"auroc", summary.auroc},
                   {"auprc", summary.auprc},
                   {"positives", summary.positives},
                   {"negatives", summary.negatives},
                   {"excluded_pixels", summary.excluded_pixels}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw data_error("cannot create " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw data_error("write failed for " + path.string());
}

}  // namespace icad
