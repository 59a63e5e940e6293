#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "madnet/dataset.hpp"
#include "madnet/detection.hpp"
#include "madnet/evaluation.hpp"
#include "madnet/network.hpp"
#include "madnet/optimizer.hpp"
#include "madnet/training.hpp"
#include "madnet/windowing.hpp"

namespace madnet {

enum class NetworkPreset { compact, table1 };

/// Every setting reachable from a config file or `--set key=value`.
struct RunConfig {
  std::uint64_t seed = 1;
  /// 0 selects the OpenMP default.
  int threads = 0;
  std::filesystem::path out = "out";

  int synthCount = 10;
  SyntheticConfig synth;

  NetworkPreset preset = NetworkPreset::compact;
  int maxoutPieces = 2;
  int convMaps = 16;
  int fcUnits = 64;
  DropProfile drops;
  bool centerInput = true;

  OptimizerConfig optimizer;

  /// Unset values scale with the network's window side.
  std::optional<double> fovealRadius;
  double sigmaSlope = 0.05;
  std::optional<SamplingGrid> rings;

  std::filesystem::path manifest;
  double maRatio = 16.0;
  double hardNegativeFraction = 0.8;
  double validationFraction = 0.2;
  double maFraction = 0.25;
  bool rotate = false;

  TrainConfig train;
  int validationWindows = 512;

  MaskConfig mask;
  PrefilterConfig prefilter;
  PostprocessConfig postprocess;
  WindowTransform transform = WindowTransform::both;

  int minRegions = 1;
  std::vector<double> frocThresholds{0.05, 0.1,  0.15, 0.2,  0.25, 0.3,  0.35, 0.4,   0.45,  0.5,
                                     0.55, 0.6,  0.65, 0.7,  0.75, 0.8,  0.85, 0.9,   0.95,  0.96,
                                     0.97, 0.98, 0.99, 0.995, 0.999};
};

/// Sets one key from its text value; throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
/// `key = value` lines, `#` starts a comment.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path);
/// Cross-field checks; throws ConfigError.
void validate(const RunConfig& cfg);
/// Effective configuration in the file format, one key per line.
std::string dump_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

NetworkSpec network_spec(const RunConfig& cfg);
FoveationConfig foveation_config(const RunConfig& cfg, int windowSide);
SamplingGrid sampling_grid(const RunConfig& cfg, int windowSide);
DetectionConfig detection_config(const RunConfig& cfg, int windowSide);
CatalogConfig catalog_config(const RunConfig& cfg);
SamplerConfig sampler_config(const RunConfig& cfg, int windowSide);

}  // namespace madnet
