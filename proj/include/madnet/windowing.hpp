#pragma once

#include <array>
#include <optional>
#include <vector>

#include "madnet/image.hpp"
#include "madnet/rng.hpp"
#include "madnet/tensor.hpp"
#include "madnet/types.hpp"

namespace madnet {

/// A [3 x w x w] patch centered on one image pixel, channels R, G, B, values in [0, 1].
struct Window {
  Tensor pixels;
  int centerX = 0;
  int centerY = 0;
  std::optional<Label> label;
  /// Index of the source image within a corpus, -1 when not tracked.
  int imageIndex = -1;

  int side() const { return static_cast<int>(pixels.extent(1)); }
};

struct FoveationConfig {
  double fovealRadius = 16.0;
  double sigmaSlope = 0.05;
};

struct SamplingRing {
  double radiusStart = 0.0;
  double radiusEnd = 0.0;
  int blockSize = 1;

  friend bool operator==(const SamplingRing&, const SamplingRing&) = default;
};

/// Rings must start at 0, be contiguous, reach w/2, and the innermost ring
/// keeps full resolution. Corner pixels beyond the last ring use the last ring.
struct SamplingGrid {
  std::vector<SamplingRing> rings;

  /// Throws ConfigError when the grid is malformed for a window of side `windowSide`.
  void validate(int windowSide) const;
};

/// r0 = 16 px and slope 0.05 at w = 129; r0 scales linearly with the window side.
FoveationConfig default_foveation(int windowSide = 129);
/// Rings (0-16: 1), (16-40: 2), (40-w/2: 4) at w = 129; radii scale with the window side.
SamplingGrid default_sampling_grid(int windowSide = 129);

/// Throws Error when the center is outside the image or w is not a positive odd number.
/// Samples beyond the image border are mirrored per axis.
Window extract_window(const Image& image, int centerX, int centerY, int side);

Window mirror_horizontal(const Window& win);
Window mirror_vertical(const Window& win);
/// [original, horizontal mirror, vertical mirror].
std::array<Window, 3> mirror_augment(const Window& win);

/// Rotation about the window center with bilinear interpolation and mirrored support.
Window rotate_augment(const Window& win, double angleDegrees);
/// Rotation by an angle drawn uniformly from [0, 360).
Window random_rotation(const Window& win, SeededRng& rng);

Window foveate(const Window& win, const FoveationConfig& cfg);
Window nonuniform_sample(const Window& win, const SamplingGrid& grid);

/// Variant index v in [0, 6): mirror v / 2 (original, horizontal, vertical),
/// then foveation for even v and nonuniform sampling for odd v.
Window augment_variant(const Window& win, int variant, const FoveationConfig& fov, const SamplingGrid& grid);
std::array<Window, 6> augment_six(const Image& image, int centerX, int centerY, int side, const FoveationConfig& fov,
                                  const SamplingGrid& grid, std::optional<Label> label = std::nullopt);

/// Window preprocessing at inference time.
enum class WindowTransform { raw, foveate, sample, both };

}  // namespace madnet
