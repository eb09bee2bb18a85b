#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cosim/metric.hpp"
#include "cosim/tensor.hpp"

namespace cosim {

// Pixel counts with "changed" as the positive class.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  std::int64_t total() const { return tp + fp + tn + fn; }
};

// A pixel is predicted changed iff its confidence reaches the threshold.
inline ChangeMask binarize(const ChangeMap& cm, double theta) {
  COSIM_CHECK_ARG(theta >= 0.0 && theta <= 1.0, "binarize: threshold must be in [0,1], got ",
                  theta);
  ChangeMask mask(cm.height(), cm.width());
  const double* v = cm.values.data();
  for (std::size_t j = 0; j < mask.size(); ++j) mask.values[j] = v[j] >= theta ? 1 : 0;
  return mask;
}

inline ConfusionCounts confusion(const ChangeMask& pred, const ChangeMask& gt) {
  COSIM_CHECK_ARG(pred.height == gt.height && pred.width == gt.width,
                  "confusion: resolution mismatch, ", pred.height, "x", pred.width, " vs ",
                  gt.height, "x", gt.width);
  ConfusionCounts c;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const bool p = pred.values[j] != 0;
    const bool g = gt.values[j] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool degenerate = false;  // some rate hit the 0/0 -> 0 convention
};

// P = TP/(TP+FP), R = TP/(TP+FN), F = 2PR/(P+R); zero denominators yield 0.
inline PRF precision_recall_f(const ConfusionCounts& c) {
  PRF r;
  if (c.tp + c.fp > 0)
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else
    r.degenerate = true;
  if (c.tp + c.fn > 0)
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  else
    r.degenerate = true;
  if (r.precision + r.recall > 0.0)
    r.f = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else
    r.degenerate = true;
  return r;
}

// FPR = FP/(FP+TN), FNR = FN/(FN+TP); zero denominators yield 0.
inline std::pair<double, double> fpr_fnr(const ConfusionCounts& c) {
  const double fpr =
      c.fp + c.tn > 0 ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) : 0.0;
  const double fnr =
      c.fn + c.tp > 0 ? static_cast<double>(c.fn) / static_cast<double>(c.fn + c.tp) : 0.0;
  return {fpr, fnr};
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // thresholds strictly increasing
  double best_threshold = 0.0;  // maximizes F, ties to the lowest threshold
  double best_f = 0.0;
  ConfusionCounts best_counts;
};

// Pooled (micro-averaged) precision-recall sweep over evenly spaced
// thresholds in [0, 1].
inline PrCurve pr_curve(const std::vector<ChangeMap>& maps, const std::vector<ChangeMask>& gts,
                        int n_thresholds) {
  COSIM_CHECK_ARG(maps.size() == gts.size(), "pr_curve: ", maps.size(), " maps vs ", gts.size(),
                  " ground-truth masks");
  COSIM_CHECK_ARG(!maps.empty(), "pr_curve: no items");
  COSIM_CHECK_ARG(n_thresholds >= 2, "pr_curve: need at least 2 thresholds, got ", n_thresholds);

  PrCurve curve;
  curve.points.resize(static_cast<std::size_t>(n_thresholds));
  std::vector<ConfusionCounts> counts(static_cast<std::size_t>(n_thresholds));
  for (std::size_t i = 0; i < maps.size(); ++i) {
    COSIM_CHECK_ARG(maps[i].height() == gts[i].height && maps[i].width() == gts[i].width,
                    "pr_curve: item ", i, " map/mask resolution mismatch");
    const double* v = maps[i].values.data();
    for (int t = 0; t < n_thresholds; ++t) {
      const double theta = static_cast<double>(t) / static_cast<double>(n_thresholds - 1);
      ConfusionCounts& c = counts[static_cast<std::size_t>(t)];
      for (std::size_t j = 0; j < gts[i].size(); ++j) {
        const bool p = v[j] >= theta;
        const bool g = gts[i].values[j] != 0;
        if (p && g)
          ++c.tp;
        else if (p && !g)
          ++c.fp;
        else if (!p && g)
          ++c.fn;
        else
          ++c.tn;
      }
    }
  }
  for (int t = 0; t < n_thresholds; ++t) {
    const double theta = static_cast<double>(t) / static_cast<double>(n_thresholds - 1);
    const PRF prf = precision_recall_f(counts[static_cast<std::size_t>(t)]);
    curve.points[static_cast<std::size_t>(t)] = {theta, prf.precision, prf.recall, prf.f};
    if (prf.f > curve.best_f) {
      curve.best_f = prf.f;
      curve.best_threshold = theta;
      curve.best_counts = counts[static_cast<std::size_t>(t)];
    }
  }
  return curve;
}

// Michelson contrast (L_max - L_min) / (L_max + L_min); 0 for a flat or
// all-zero map.
inline double michelson_contrast(const Tensor& map) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : map.values()) {
    COSIM_CHECK_ARG(v >= 0.0, "michelson_contrast: map must be non-negative, found ", v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double denom = hi + lo;
  if (denom == 0.0) return 0.0;
  return (hi - lo) / denom;
}

// RMS contrast sqrt(mean((L - L_mean)^2)) / L_mean; 0 when the mean is 0.
inline double rms_contrast(const Tensor& map) {
  const auto n = static_cast<double>(map.numel());
  double mean = 0.0;
  for (double v : map.values()) mean += v;
  mean /= n;
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double v : map.values()) var += (v - mean) * (v - mean);
  var /= n;
  return std::sqrt(var) / mean;
}

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double best_threshold = 0.0;
  bool degenerate_rates = false;
  std::vector<PrPoint> pr_points;
};

// Headline rates are evaluated at the best-F threshold of the pooled sweep.
inline EvalReport make_eval_report(const std::vector<ChangeMap>& maps,
                                   const std::vector<ChangeMask>& gts, int n_thresholds) {
  const PrCurve curve = pr_curve(maps, gts, n_thresholds);
  const PRF prf = precision_recall_f(curve.best_counts);
  const auto [fpr, fnr] = fpr_fnr(curve.best_counts);
  EvalReport report;
  report.precision = prf.precision;
  report.recall = prf.recall;
  report.f_score = prf.f;
  report.fpr = fpr;
  report.fnr = fnr;
  report.best_threshold = curve.best_threshold;
  report.degenerate_rates = prf.degenerate;
  report.pr_points = curve.points;
  return report;
}

inline std::string pr_curve_csv(const std::vector<PrPoint>& points) {
  std::string out = "threshold,precision,recall\n";
  char line[128];
  for (const PrPoint& p : points) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", p.threshold, p.precision, p.recall);
    out += line;
  }
  return out;
}

}  // namespace cosim
