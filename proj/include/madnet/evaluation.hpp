#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "madnet/detection.hpp"
#include "madnet/image.hpp"

namespace madnet {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Pixel-wise counts inside `mask` (all pixels when the mask is empty).
ConfusionCounts confusion(const BinaryRaster& predicted, const BinaryRaster& truth, const BinaryRaster& mask = {});

/// A metric is nullopt when its denominator is zero.
struct MetricsReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> predictivity;
  std::optional<double> accuracy;
};

MetricsReport metrics(const ConfusionCounts& c);
/// "undefined" for a missing value, otherwise fixed with 4 decimals.
std::string format_metric(const std::optional<double>& value);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  /// Ordered by decreasing threshold, from (0, 0) to (1, 1).
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Every distinct score is a threshold (score >= t is positive); tied scores
/// move together, so the trapezoidal AUC equals the Mann-Whitney statistic
/// with ties counted one half. Throws DataError unless both classes occur.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);
/// Only the supplied thresholds; the curve is closed with (1, 1) when the
/// lowest threshold leaves samples negative.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels, std::vector<double> thresholds);
/// Scores restricted to in-mask pixels; skipped pixels score 0.
RocCurve roc_curve(const std::vector<const ProbabilityMap*>& maps, const std::vector<const BinaryRaster*>& labels,
                   const std::vector<const BinaryRaster*>& masks);

struct FrocPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double averageFalsePositives = 0.0;
};

/// `detections[t][i]` are the regions accepted on image i at `thresholds[t]`.
/// A labeled MA (8-connected label component) is hit when any detected pixel
/// overlaps it; a detection overlapping no MA is a false positive.
std::vector<FrocPoint> froc(const std::vector<double>& thresholds,
                            const std::vector<std::vector<std::vector<Region>>>& detections,
                            const std::vector<const BinaryRaster*>& labels);
/// Best sensitivity over points with averageFalsePositives <= fpBudget; 0 when none qualifies.
double sensitivity_at(const std::vector<FrocPoint>& curve, double fpBudget);

struct DecisionRule {
  int minRegions = 1;
};

/// True (DR present) when at least minRegions regions survive.
bool image_decision(const std::vector<Region>& regions, const DecisionRule& rule = {});
/// Image score for ROC: highest region mean probability, 0 without regions.
double image_score(const std::vector<Region>& regions);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_froc_csv(const std::filesystem::path& path, const std::vector<FrocPoint>& curve);

}  // namespace madnet
