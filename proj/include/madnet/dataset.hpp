#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "madnet/detection.hpp"
#include "madnet/image.hpp"
#include "madnet/rng.hpp"
#include "madnet/types.hpp"
#include "madnet/windowing.hpp"

namespace madnet {

/// An image with its field-of-view mask and pixel-level MA labels, all the same size.
struct AnnotatedImage {
  std::string name;
  Image rgb;
  BinaryRaster fovMask;
  BinaryRaster labels;
  /// Known hard-negative locations (vessel crossings, bifurcations, endpoints,
  /// hemorrhage pixels) when the source provides them.
  std::vector<Point> hardNegativeHints;
};

struct SyntheticConfig {
  int imageSize = 256;
  int maCount = 12;
  int vesselCount = 8;
  int hemorrhageCount = 3;
  double noiseLevel = 0.01;
  std::uint64_t seed = 1;
};

/// Renders a fundus-like image: dark surround outside a circular field of
/// view, reddish vignetted background, bright optic disc, branching and
/// crossing vessels, Gaussian-profile MA dots (radius 1 to 2.5 px) with an
/// exact label raster, irregular hemorrhage blobs and sensor noise. Pixel
/// values are quantized to 8 bits so a file round trip is lossless.
AnnotatedImage synth_generate(const SyntheticConfig& cfg);

/// Peak relative green darkening used by the renderer, exposed for tests.
struct SyntheticContrast {
  double maMin = 0.26;
  double maMax = 0.36;
  double vesselMin = 0.40;
  double vesselMax = 0.55;
};
SyntheticContrast synthetic_contrast();

/// Labels are read from an 8-bit PGM (255 = MA). Without a mask path the
/// field of view comes from compute_mask. Throws DataError on unreadable
/// files or mismatched dimensions; labels outside the mask are cleared.
AnnotatedImage load_annotated(const std::filesystem::path& imagePath, const std::filesystem::path& labelPath,
                              const std::optional<std::filesystem::path>& maskPath = std::nullopt,
                              const MaskConfig& maskConfig = {});

/// Point annotations: lines `imageRelativePath,x,y`.
std::map<std::string, std::vector<Point>> read_point_annotations(const std::filesystem::path& path);
BinaryRaster rasterize_points(const std::vector<Point>& points, int width, int height);

struct ManifestEntry {
  std::filesystem::path image;
  std::optional<std::filesystem::path> label;
  std::optional<std::filesystem::path> mask;
};

/// Lines `image,label,mask`; label and mask may be empty. Relative paths
/// resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct CatalogEntry {
  int imageIndex = 0;
  int x = 0;
  int y = 0;
  bool hardNegative = false;

  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct SampleCatalog {
  std::vector<CatalogEntry> maCenters;
  std::vector<CatalogEntry> nonMaCenters;

  friend bool operator==(const SampleCatalog&, const SampleCatalog&) = default;
};

struct CatalogConfig {
  /// Non-MA centers per MA center.
  double nonMaPerMa = 16.0;
  double hardNegativeFraction = 0.8;
  PrefilterConfig prefilter;
  std::uint64_t seed = 1;
};

/// Every MA pixel becomes an MA center. Non-MA centers are drawn without
/// replacement: the hard share from generator hints plus prefilter
/// candidates (dark, vessel-like pixels), the rest uniformly from the mask.
CatalogConfig default_catalog_config();
SampleCatalog build_catalog(const std::vector<AnnotatedImage>& images, const CatalogConfig& cfg);

/// Per-image split: returns indices of validation images.
std::vector<int> split_validation(int imageCount, double validationFraction, std::uint64_t seed);

struct SamplerConfig {
  int batchSize = 128;
  double maFraction = 0.25;
  int windowSide = 129;
  FoveationConfig foveation;
  SamplingGrid sampling = default_sampling_grid();
  bool rotate = false;
};

/// Stratified, deterministic stream of labeled training windows. Each draw
/// picks a center, then one of the six augmentation variants uniformly.
class BatchSampler {
 public:
  BatchSampler(const std::vector<AnnotatedImage>& images, const SampleCatalog& catalog, SamplerConfig cfg,
               std::uint64_t seed);

  /// round(batchSize * maFraction) MA windows first, then non-MA windows.
  std::vector<Window> next_batch();
  const SamplerConfig& config() const { return cfg_; }

 private:
  const std::vector<AnnotatedImage>& images_;
  const SampleCatalog& catalog_;
  SamplerConfig cfg_;
  SeededRng rng_;
};

}  // namespace madnet
