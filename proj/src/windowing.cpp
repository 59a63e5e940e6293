#include "madnet/windowing.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "madnet/kernels.hpp"

namespace madnet {

namespace {

double center_of(int side) { return 0.5 * (side - 1); }

double distance_from_center(int x, int y, int side) {
  const double c = center_of(side);
  return std::hypot(x - c, y - c);
}

Window with_pixels(const Window& like, Tensor pixels) {
  Window out = like;
  out.pixels = std::move(pixels);
  return out;
}

}  // namespace

void SamplingGrid::validate(int windowSide) const {
  if (rings.empty()) throw ConfigError("sampling grid has no rings");
  if (rings.front().radiusStart != 0.0) throw ConfigError("sampling grid must start at radius 0");
  if (rings.front().blockSize != 1) throw ConfigError("innermost sampling ring must keep block size 1");
  for (std::size_t i = 0; i < rings.size(); ++i) {
    const SamplingRing& r = rings[i];
    if (r.blockSize < 1) throw ConfigError("sampling block size must be >= 1");
    if (r.blockSize > windowSide) throw ConfigError("sampling block size exceeds window side");
    if (!(r.radiusEnd > r.radiusStart)) throw ConfigError("sampling ring " + std::to_string(i) + " is empty");
    if (i > 0 && r.radiusStart != rings[i - 1].radiusEnd) {
      throw ConfigError("sampling rings must be contiguous and non-overlapping");
    }
  }
  if (rings.back().radiusEnd < 0.5 * windowSide) {
    throw ConfigError("sampling rings end at " + std::to_string(rings.back().radiusEnd) + ", short of w/2 = " +
                      std::to_string(0.5 * windowSide));
  }
}

FoveationConfig default_foveation(int windowSide) {
  return {std::round(16.0 * windowSide / 129.0), 0.05};
}

SamplingGrid default_sampling_grid(int windowSide) {
  const double inner = std::round(16.0 * windowSide / 129.0);
  const double middle = std::round(40.0 * windowSide / 129.0);
  return {{{0.0, inner, 1}, {inner, middle, 2}, {middle, 0.5 * windowSide, 4}}};
}

Window extract_window(const Image& image, int centerX, int centerY, int side) {
  if (side < 1 || side % 2 == 0) throw Error("window side must be a positive odd number, got " + std::to_string(side));
  if (!image.contains(centerX, centerY)) {
    throw Error("window center (" + std::to_string(centerX) + "," + std::to_string(centerY) + ") outside " +
                std::to_string(image.width()) + "x" + std::to_string(image.height()) + " image");
  }
  const int half = side / 2;
  const auto s = static_cast<std::size_t>(side);
  Window win;
  win.pixels = Tensor({3, s, s});
  win.centerX = centerX;
  win.centerY = centerY;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      const auto sy = static_cast<int>(reflect_index(centerY - half + y, image.height()));
      for (int x = 0; x < side; ++x) {
        const auto sx = static_cast<int>(reflect_index(centerX - half + x, image.width()));
        win.pixels.at(c, y, x) = image.at(c, sx, sy);
      }
    }
  }
  return win;
}

Window mirror_horizontal(const Window& win) {
  const auto s = static_cast<std::size_t>(win.side());
  Tensor out(win.pixels.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) out.at(c, y, x) = win.pixels.at(c, y, s - 1 - x);
    }
  }
  return with_pixels(win, std::move(out));
}

Window mirror_vertical(const Window& win) {
  const auto s = static_cast<std::size_t>(win.side());
  Tensor out(win.pixels.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) out.at(c, y, x) = win.pixels.at(c, s - 1 - y, x);
    }
  }
  return with_pixels(win, std::move(out));
}

std::array<Window, 3> mirror_augment(const Window& win) {
  return {win, mirror_horizontal(win), mirror_vertical(win)};
}

Window rotate_augment(const Window& win, double angleDegrees) {
  const int side = win.side();
  const double c = center_of(side);
  const double theta = angleDegrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  Tensor out(win.pixels.shape());
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = x - c;
      const double dy = y - c;
      const double sx = c + cs * dx + sn * dy;
      const double sy = c - sn * dx + cs * dy;
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      const double fx = sx - fx0;
      const double fy = sy - fy0;
      const auto x0 = static_cast<long>(fx0);
      const auto y0 = static_cast<long>(fy0);
      const std::size_t xa = reflect_index(x0, side), xb = reflect_index(x0 + 1, side);
      const std::size_t ya = reflect_index(y0, side), yb = reflect_index(y0 + 1, side);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - fx) * win.pixels.at(ch, ya, xa) + fx * win.pixels.at(ch, ya, xb);
        const double bottom = (1.0 - fx) * win.pixels.at(ch, yb, xa) + fx * win.pixels.at(ch, yb, xb);
        out.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return with_pixels(win, std::move(out));
}

Window random_rotation(const Window& win, SeededRng& rng) { return rotate_augment(win, rng.uniform(0.0, 360.0)); }

Window foveate(const Window& win, const FoveationConfig& cfg) {
  if (cfg.fovealRadius < 0.0 || cfg.sigmaSlope < 0.0) throw ConfigError("foveation radius and slope must be >= 0");
  if (cfg.sigmaSlope == 0.0) return win;
  const int side = win.side();
  Tensor out = win.pixels;
  std::map<long, std::vector<double>> kernels;  // per unit-width annulus
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double d = distance_from_center(x, y, side);
      if (d <= cfg.fovealRadius) continue;
      const auto annulus = static_cast<long>(std::floor(d - cfg.fovealRadius));
      auto it = kernels.find(annulus);
      if (it == kernels.end()) {
        it = kernels.emplace(annulus, gaussian_kernel(cfg.sigmaSlope * (annulus + 0.5))).first;
      }
      const std::vector<double>& taps = it->second;
      const long radius = static_cast<long>(taps.size() / 2);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double sum = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          const std::size_t sy = reflect_index(y + i, side);
          double row = 0.0;
          for (long j = -radius; j <= radius; ++j) row += taps[j + radius] * win.pixels.at(ch, sy, reflect_index(x + j, side));
          sum += taps[i + radius] * row;
        }
        out.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = sum;
      }
    }
  }
  return with_pixels(win, std::move(out));
}

Window nonuniform_sample(const Window& win, const SamplingGrid& grid) {
  const int side = win.side();
  grid.validate(side);
  Tensor out = win.pixels;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double d = distance_from_center(x, y, side);
      int block = grid.rings.back().blockSize;
      for (const SamplingRing& r : grid.rings) {
        if (d >= r.radiusStart && d < r.radiusEnd) {
          block = r.blockSize;
          break;
        }
      }
      if (block == 1) continue;
      // Blocks tile from the top-left; the last partial block is pulled inward so every block is full.
      const int bx = std::min((x / block) * block, side - block);
      const int by = std::min((y / block) * block, side - block);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double sum = 0.0;
        for (int i = 0; i < block; ++i) {
          for (int j = 0; j < block; ++j) sum += win.pixels.at(ch, static_cast<std::size_t>(by + i), static_cast<std::size_t>(bx + j));
        }
        out.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = sum / (block * block);
      }
    }
  }
  return with_pixels(win, std::move(out));
}

Window augment_variant(const Window& win, int variant, const FoveationConfig& fov, const SamplingGrid& grid) {
  if (variant < 0 || variant >= 6) throw Error("augmentation variant must lie in [0, 6)");
  Window mirrored = variant / 2 == 0 ? win : (variant / 2 == 1 ? mirror_horizontal(win) : mirror_vertical(win));
  return variant % 2 == 0 ? foveate(mirrored, fov) : nonuniform_sample(mirrored, grid);
}

std::array<Window, 6> augment_six(const Image& image, int centerX, int centerY, int side, const FoveationConfig& fov,
                                  const SamplingGrid& grid, std::optional<Label> label) {
  Window base = extract_window(image, centerX, centerY, side);
  base.label = label;
  const std::array<Window, 3> mirrors = mirror_augment(base);
  std::array<Window, 6> out;
  for (int m = 0; m < 3; ++m) {
    out[2 * m] = foveate(mirrors[m], fov);
    out[2 * m + 1] = nonuniform_sample(mirrors[m], grid);
  }
  return out;
}

}  // namespace madnet
