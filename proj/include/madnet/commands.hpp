#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "madnet/config.hpp"
#include "madnet/dataset.hpp"
#include "madnet/detection.hpp"
#include "madnet/evaluation.hpp"

namespace madnet {

/// Writes synth.count images as PPM plus label and mask PGMs, a `.hints`
/// file of hard-negative points per image, and manifest.txt, all under cfg.out.
std::filesystem::path run_synth(const RunConfig& cfg, std::ostream& log);

/// Loads every manifest entry. A sibling `<image>.hints` file of `x,y`
/// lines, when present, supplies hard-negative hints. With requireLabels,
/// unlabeled entries raise a DataError listing all of them.
std::vector<AnnotatedImage> load_corpus(const std::vector<ManifestEntry>& entries, const MaskConfig& mask,
                                        bool requireLabels);

/// Trains on the manifest and writes model.ckpt, train_log.csv and
/// validation.csv under cfg.out. A non-finite loss keeps the last good
/// checkpoint and throws NumericError.
std::filesystem::path run_train(const RunConfig& cfg, std::ostream& log);

/// Writes <stem>.map, <stem>_prob.pgm and <stem>_regions.txt under cfg.out.
DetectionResult run_predict(const RunConfig& cfg, const std::filesystem::path& image,
                            const std::filesystem::path& checkpoint, std::ostream& log);

struct ImageEvaluation {
  std::string name;
  ConfusionCounts counts;
  int regions = 0;
  bool decision = false;
  bool truth = false;
  double score = 0.0;
};

struct EvaluationReport {
  std::vector<ImageEvaluation> images;
  ConfusionCounts pooled;
  RocCurve pixelRoc;
  std::optional<double> imageAuc;
  std::vector<FrocPoint> froc;
};

/// Scores precomputed probability maps against labeled images.
EvaluationReport evaluate_maps(const std::vector<AnnotatedImage>& images, const std::vector<ProbabilityMap>& maps,
                               const RunConfig& cfg);
/// Human-readable summary; pixel-level and image-level AUC are labeled separately.
std::string format_report(const EvaluationReport& report, const RunConfig& cfg);
void write_report(const EvaluationReport& report, const RunConfig& cfg, const std::filesystem::path& dir);

/// Detects on every manifest image and writes metrics.txt, roc.csv,
/// froc.csv and per_image.csv under cfg.out.
EvaluationReport run_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);

/// Pixel-level ROC only: roc.csv under cfg.out. Returns the AUC.
double run_roc(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);

}  // namespace madnet
