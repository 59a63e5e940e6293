#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "madnet/image.hpp"
#include "madnet/network.hpp"
#include "madnet/types.hpp"
#include "madnet/windowing.hpp"

namespace madnet {

struct MaskConfig {
  double luminanceThreshold = 0.06;
  int medianSize = 5;
  int erosionRadius = 8;
};

/// In-mask iff the median-smoothed luminance exceeds the threshold, then
/// eroded by a disc so the black camera surround and its edge are excluded.
BinaryRaster compute_mask(const Image& image, const MaskConfig& cfg = {});

struct PrefilterConfig {
  double kappa = 0.5;
  int neighborhood = 31;
  /// Side of an in-mask box average applied to the tested pixel; 1 compares the raw value.
  int smoothing = 1;
};

/// Candidate iff in-mask and the green value lies below
/// mean - kappa * std of the in-mask green values in the neighborhood.
BinaryRaster color_prefilter(const Image& image, const BinaryRaster& mask, const PrefilterConfig& cfg = {});

struct ProbabilityMap {
  int width = 0;
  int height = 0;
  std::vector<double> prob;
  /// 1 where the pixel was masked out or rejected by the prefilter; prob is 0 there.
  std::vector<std::uint8_t> skipped;

  ProbabilityMap() = default;
  ProbabilityMap(int w, int h)
      : width(w), height(h), prob(static_cast<std::size_t>(w) * h, 0.0), skipped(static_cast<std::size_t>(w) * h, 1) {}

  double at(int x, int y) const { return prob[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;
};

struct InferenceConfig {
  WindowTransform transform = WindowTransform::both;
  FoveationConfig foveation;
  SamplingGrid sampling = default_sampling_grid();
};

/// MA probability of the window centered at (x, y) after the configured
/// transform; `both` averages the foveated and the nonuniformly sampled window.
double window_probability(const Image& image, int x, int y, const NetworkState& state, const NetworkSpec& spec,
                          const InferenceConfig& cfg);

/// Candidates are processed in parallel, each worker owning disjoint pixels.
ProbabilityMap sliding_window_inference(const Image& image, const BinaryRaster& candidates, const NetworkState& state,
                                        const NetworkSpec& spec, const InferenceConfig& cfg);

/// An 8-connected pixel set. hullArea counts the lattice points inside the
/// convex hull of the pixel centers (shoelace area + boundary points / 2 + 1),
/// so single pixels and straight lines have convexity 1.
struct Region {
  std::vector<Point> pixels;
  int area = 0;
  double hullArea = 0.0;
  double convexity = 0.0;
  double meanProb = 0.0;
};

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
std::vector<Point> convex_hull(std::vector<Point> points);
/// Lattice points inside or on the hull polygon (Pick's theorem).
double hull_lattice_area(const std::vector<Point>& hull);
Region make_region(std::vector<Point> pixels);

/// Regions in raster scan order of their first pixel.
std::vector<Region> connected_components(const BinaryRaster& foreground);

struct PostprocessConfig {
  double probThreshold = 0.5;
  int maxArea = 21;
  double minConvexity = 0.8;
};

/// Keeps regions with area <= maxArea and convexity >= minConvexity.
std::vector<Region> region_filter(const std::vector<Region>& regions, const PostprocessConfig& cfg);

/// Pixels with p >= threshold that were not skipped.
BinaryRaster threshold_map(const ProbabilityMap& map, double threshold);
/// Threshold, label components, attach mean probability, filter.
std::vector<Region> postprocess(const ProbabilityMap& map, const PostprocessConfig& cfg);
/// Union of region pixels as a raster.
BinaryRaster regions_to_raster(const std::vector<Region>& regions, int width, int height);

struct DetectionConfig {
  MaskConfig mask;
  PrefilterConfig prefilter;
  InferenceConfig inference;
  PostprocessConfig postprocess;
};

struct DetectionResult {
  BinaryRaster mask;
  BinaryRaster candidates;
  ProbabilityMap map;
  std::vector<Region> regions;
};

/// Mask, prefilter, sliding-window map, threshold, components, region filter.
/// Errors are rethrown with the failing stage named.
DetectionResult detect(const Image& image, const NetworkState& state, const NetworkSpec& spec,
                       const DetectionConfig& cfg);

// Probability map file: "MAPF1\0", u32 width, u32 height, then width*height
// f32 row-major, all little-endian.
void write_probability_map(const std::filesystem::path& path, const ProbabilityMap& map);
/// Skipped flags are not stored; pixels read back with probability 0 are marked skipped.
ProbabilityMap read_probability_map(const std::filesystem::path& path);
/// 16-bit PGM, value round(p * 65535).
void write_probability_pgm(const std::filesystem::path& path, const ProbabilityMap& map);

/// `# image: <path>` then one `x,y,area,convexity,meanProb` line per region;
/// (x, y) is the rounded centroid.
std::string format_regions(const std::string& imagePath, const std::vector<Region>& regions);
void write_regions(const std::filesystem::path& path, const std::string& imagePath, const std::vector<Region>& regions);

}  // namespace madnet
