#include "madnet/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>

#include "madnet/error.hpp"

namespace madnet {

ConfusionCounts confusion(const BinaryRaster& predicted, const BinaryRaster& truth, const BinaryRaster& mask) {
  require_same_size(predicted, truth, "prediction vs label");
  const bool masked = !mask.data.empty();
  if (masked) require_same_size(predicted, mask, "prediction vs mask");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (masked && !mask.data[i]) continue;
    const bool p = predicted.data[i] != 0;
    const bool t = truth.data[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

MetricsReport metrics(const ConfusionCounts& c) {
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp), ratio(c.tp, c.tp + c.fp),
          ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn)};
}

std::string format_metric(const std::optional<double>& value) {
  if (!value) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *value);
  return buf;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("ROC: score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double positives = 0;
  for (const int l : labels) positives += l ? 1 : 0;
  const double negatives = static_cast<double>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) throw DataError("ROC needs both positive and negative samples");

  RocCurve curve;
  curve.points.push_back({scores.empty() ? 1.0 : scores[order.front()] + 1.0, 0.0, 0.0});
  double tp = 0;
  double fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      if (labels[order[i]]) tp += 1;
      else fp += 1;
      ++i;
    }
    const RocPoint p{t, fp / negatives, tp / positives};
    const RocPoint& q = curve.points.back();
    curve.auc += (p.fpr - q.fpr) * (p.tpr + q.tpr) / 2.0;
    curve.points.push_back(p);
  }
  return curve;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels, std::vector<double> thresholds) {
  if (scores.size() != labels.size()) throw DataError("ROC: score and label counts differ");
  double positives = 0;
  for (const int l : labels) positives += l ? 1 : 0;
  const double negatives = static_cast<double>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) throw DataError("ROC needs both positive and negative samples");
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  RocCurve curve;
  curve.points.push_back({thresholds.empty() ? 1.0 : thresholds.front() + 1.0, 0.0, 0.0});
  auto add = [&](const RocPoint& p) {
    const RocPoint& q = curve.points.back();
    curve.auc += (p.fpr - q.fpr) * (p.tpr + q.tpr) / 2.0;
    curve.points.push_back(p);
  };
  for (const double t : thresholds) {
    double tp = 0;
    double fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < t) continue;
      if (labels[i]) tp += 1;
      else fp += 1;
    }
    add({t, fp / negatives, tp / positives});
  }
  if (curve.points.back().fpr < 1.0 || curve.points.back().tpr < 1.0) {
    const double lowest = *std::min_element(scores.begin(), scores.end());
    add({std::min(lowest, curve.points.back().threshold), 1.0, 1.0});
  }
  return curve;
}

RocCurve roc_curve(const std::vector<const ProbabilityMap*>& maps, const std::vector<const BinaryRaster*>& labels,
                   const std::vector<const BinaryRaster*>& masks) {
  if (maps.size() != labels.size() || maps.size() != masks.size()) throw DataError("ROC: map, label and mask counts differ");
  std::vector<double> scores;
  std::vector<int> truth;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const ProbabilityMap& m = *maps[i];
    require_same_size(m, *labels[i], "probability map vs label");
    require_same_size(m, *masks[i], "probability map vs mask");
    for (std::size_t k = 0; k < m.prob.size(); ++k) {
      if (!masks[i]->data[k]) continue;
      scores.push_back(m.skipped[k] ? 0.0 : m.prob[k]);
      truth.push_back(labels[i]->data[k] ? 1 : 0);
    }
  }
  return roc_curve(scores, truth);
}

std::vector<FrocPoint> froc(const std::vector<double>& thresholds,
                            const std::vector<std::vector<std::vector<Region>>>& detections,
                            const std::vector<const BinaryRaster*>& labels) {
  if (detections.size() != thresholds.size()) throw DataError("FROC: one detection set per threshold required");
  const std::size_t n = labels.size();
  if (n == 0) throw DataError("FROC needs at least one image");
  // Label components, indexed per pixel.
  std::vector<std::vector<int>> componentOf(n);
  long totalMa = 0;
  std::vector<int> offsets(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const BinaryRaster& lab = *labels[i];
    componentOf[i].assign(lab.size(), -1);
    const auto comps = connected_components(lab);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      for (const Point& p : comps[c].pixels) componentOf[i][static_cast<std::size_t>(p.y) * lab.width + p.x] = static_cast<int>(c);
    }
    offsets[i] = static_cast<int>(comps.size());
    totalMa += static_cast<long>(comps.size());
  }
  std::vector<FrocPoint> out;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (detections[t].size() != n) throw DataError("FROC: detections and labels differ in image count");
    long hits = 0;
    long falsePositives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const BinaryRaster& lab = *labels[i];
      std::vector<std::uint8_t> hit(static_cast<std::size_t>(offsets[i]), 0);
      for (const Region& r : detections[t][i]) {
        bool overlaps = false;
        for (const Point& p : r.pixels) {
          if (!lab.contains(p.x, p.y)) continue;
          const int c = componentOf[i][static_cast<std::size_t>(p.y) * lab.width + p.x];
          if (c >= 0) {
            overlaps = true;
            hit[c] = 1;
          }
        }
        if (!overlaps) ++falsePositives;
      }
      for (const auto h : hit) hits += h;
    }
    out.push_back({thresholds[t], totalMa ? static_cast<double>(hits) / totalMa : 0.0,
                   static_cast<double>(falsePositives) / static_cast<double>(n)});
  }
  return out;
}

double sensitivity_at(const std::vector<FrocPoint>& curve, double fpBudget) {
  double best = 0.0;
  for (const FrocPoint& p : curve) {
    if (p.averageFalsePositives <= fpBudget) best = std::max(best, p.sensitivity);
  }
  return best;
}

bool image_decision(const std::vector<Region>& regions, const DecisionRule& rule) {
  return static_cast<int>(regions.size()) >= rule.minRegions;
}

double image_score(const std::vector<Region>& regions) {
  double best = 0.0;
  for (const Region& r : regions) best = std::max(best, r.meanProb);
  return best;
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold,one_minus_sp,se\n";
  char buf[96];
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.threshold, p.fpr, p.tpr);
    out << buf;
  }
}

void write_froc_csv(const std::filesystem::path& path, const std::vector<FrocPoint>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold,avg_fp_per_image,se\n";
  char buf[96];
  for (const FrocPoint& p : curve) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.threshold, p.averageFalsePositives, p.sensitivity);
    out << buf;
  }
}

}  // namespace madnet
