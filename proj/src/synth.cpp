#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "madnet/dataset.hpp"
#include "madnet/error.hpp"

namespace madnet {

namespace {

constexpr double kChannelDarkening[3] = {0.45, 1.0, 0.7};
constexpr double kDiscBoost[3] = {0.25, 0.55, 0.6};

struct VesselField {
  Raster<double> strength;   // relative darkening
  Raster<double> second;     // strongest contribution from a different segment
  Raster<int> owner;         // segment id of `strength`
};

class Renderer {
 public:
  Renderer(const SyntheticConfig& cfg) : cfg_(cfg), rng_(cfg.seed), n_(cfg.imageSize) {
    center_ = 0.5 * (n_ - 1);
    radius_ = 0.46 * n_;
    vessels_ = {Raster<double>(n_, n_), Raster<double>(n_, n_), Raster<int>(n_, n_, -1)};
    hemorrhage_ = Raster<double>(n_, n_);
    ma_ = Raster<double>(n_, n_);
    disc_ = Raster<double>(n_, n_);
  }

  AnnotatedImage run() {
    AnnotatedImage out;
    out.name = "synthetic-" + std::to_string(cfg_.seed);
    out.fovMask = BinaryRaster(n_, n_);
    out.labels = BinaryRaster(n_, n_);
    for (int y = 0; y < n_; ++y) {
      for (int x = 0; x < n_; ++x) out.fovMask.at(x, y) = inside_fov(x, y, 0.0) ? 1 : 0;
    }
    place_disc();
    for (int v = 0; v < cfg_.vesselCount; ++v) grow_main_vessel(v);
    collect_junctions();
    for (int h = 0; h < cfg_.hemorrhageCount; ++h) place_hemorrhage();
    for (int m = 0; m < cfg_.maCount; ++m) place_ma(out.labels);
    out.rgb = compose(out.fovMask);
    out.hardNegativeHints = std::move(hints_);
    std::sort(out.hardNegativeHints.begin(), out.hardNegativeHints.end());
    out.hardNegativeHints.erase(std::unique(out.hardNegativeHints.begin(), out.hardNegativeHints.end()),
                                out.hardNegativeHints.end());
    std::erase_if(out.hardNegativeHints, [&](const Point& p) { return out.labels.at(p.x, p.y) != 0; });
    return out;
  }

 private:
  bool inside_fov(double x, double y, double margin) const {
    return std::hypot(x - center_, y - center_) <= radius_ - margin;
  }

  void place_disc() {
    const double side = rng_.uniform() < 0.5 ? -1.0 : 1.0;
    discX_ = center_ + side * 0.28 * n_;
    discY_ = center_ + rng_.uniform(-0.05, 0.05) * n_;
    discRadius_ = 0.075 * n_;
    for (int y = 0; y < n_; ++y) {
      for (int x = 0; x < n_; ++x) {
        const double q = std::hypot(x - discX_, y - discY_) / discRadius_;
        disc_.at(x, y) = std::exp(-q * q * q * q);
      }
    }
  }

  void stamp_vessel(double px, double py, double halfWidth, double contrast, int segment) {
    const double sigma = 0.75 * halfWidth;
    const int reach = static_cast<int>(std::ceil(halfWidth + 3.0));
    for (int y = static_cast<int>(py) - reach; y <= static_cast<int>(py) + reach; ++y) {
      for (int x = static_cast<int>(px) - reach; x <= static_cast<int>(px) + reach; ++x) {
        if (!vessels_.strength.contains(x, y)) continue;
        const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
        const double v = contrast * std::exp(-d2 / (2.0 * sigma * sigma));
        if (v < 1e-4) continue;
        double& strongest = vessels_.strength.at(x, y);
        int& owner = vessels_.owner.at(x, y);
        double& second = vessels_.second.at(x, y);
        if (owner == segment) {
          strongest = std::max(strongest, v);
        } else if (v > strongest) {
          second = std::max(second, strongest);
          strongest = v;
          owner = segment;
        } else {
          second = std::max(second, v);
        }
      }
    }
  }

  void grow_segment(double x, double y, double direction, double halfWidth, double contrast, int depth) {
    const int segment = nextSegment_++;
    const double budget = rng_.uniform(0.5, 1.5) * radius_;
    double curvature = 0.0;
    const double startWidth = halfWidth;
    for (double travelled = 0.0; travelled < budget; travelled += 1.0) {
      curvature = std::clamp(curvature + 0.02 * rng_.normal(), -0.05, 0.05);
      direction += curvature;
      x += std::cos(direction);
      y += std::sin(direction);
      if (!inside_fov(x, y, 1.0)) return;
      halfWidth = std::max(0.7, startWidth * (1.0 - 0.4 * travelled / budget));
      stamp_vessel(x, y, halfWidth, contrast, segment);
      stamp_vessel(x - 0.5 * std::cos(direction), y - 0.5 * std::sin(direction), halfWidth, contrast, segment);
      if (depth < 2 && travelled > 20.0 && rng_.uniform() < 0.012) {
        const double turn = (rng_.uniform() < 0.5 ? -1.0 : 1.0) * rng_.uniform(0.5, 1.0);
        hints_.push_back({static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))});
        grow_segment(x, y, direction + turn, halfWidth * 0.75, contrast * rng_.uniform(0.9, 1.0), depth + 1);
      }
    }
    // Ran out of length inside the field of view: a disconnected vessel end.
    hints_.push_back({static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))});
  }

  void grow_main_vessel(int index) {
    const SyntheticContrast c = synthetic_contrast();
    const double contrast = rng_.uniform(c.vesselMin, c.vesselMax);
    const double halfWidth = rng_.uniform(1.5, 2.2);
    if (index % 3 != 2) {
      const double angle = rng_.uniform(0.0, 2.0 * std::numbers::pi);
      grow_segment(discX_ + 0.8 * discRadius_ * std::cos(angle), discY_ + 0.8 * discRadius_ * std::sin(angle), angle,
                   halfWidth, contrast, 0);
    } else {
      const double angle = rng_.uniform(0.0, 2.0 * std::numbers::pi);
      const double sx = center_ + (radius_ - 3.0) * std::cos(angle);
      const double sy = center_ + (radius_ - 3.0) * std::sin(angle);
      grow_segment(sx, sy, angle + std::numbers::pi + rng_.uniform(-0.6, 0.6), halfWidth * 0.8, contrast, 1);
    }
  }

  // Pixels where two different segments are both strong: crossings and bifurcations.
  void collect_junctions() {
    for (int y = 0; y < n_; ++y) {
      for (int x = 0; x < n_; ++x) {
        if (vessels_.second.at(x, y) > 0.2 && vessels_.strength.at(x, y) > 0.2) hints_.push_back({x, y});
      }
    }
  }

  double clutter(int x, int y) const {
    return std::max({vessels_.strength.at(x, y), hemorrhage_.at(x, y), disc_.at(x, y)});
  }

  bool clear_of_clutter(int cx, int cy, double reach) const {
    const int r = static_cast<int>(std::ceil(reach));
    for (int y = cy - r; y <= cy + r; ++y) {
      for (int x = cx - r; x <= cx + r; ++x) {
        if (!disc_.contains(x, y)) return false;
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > reach * reach) continue;
        if (clutter(x, y) > 0.05 || ma_.at(x, y) > 0.01) return false;
      }
    }
    return true;
  }

  void place_hemorrhage() {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      const int cx = static_cast<int>(rng_.uniform(0.0, n_));
      const int cy = static_cast<int>(rng_.uniform(0.0, n_));
      if (!inside_fov(cx, cy, 20.0) || disc_.at(cx, cy) > 0.01) continue;
      const double darkness = rng_.uniform(0.5, 0.65);
      const int lobes = 3 + static_cast<int>(rng_.index(3));
      for (int l = 0; l < lobes; ++l) {
        const double lx = cx + rng_.uniform(-4.0, 4.0);
        const double ly = cy + rng_.uniform(-4.0, 4.0);
        const double s = rng_.uniform(2.5, 4.5);
        for (int y = cy - 16; y <= cy + 16; ++y) {
          for (int x = cx - 16; x <= cx + 16; ++x) {
            if (!hemorrhage_.contains(x, y)) continue;
            const double q = std::hypot(x - lx, y - ly) / s;
            hemorrhage_.at(x, y) = std::max(hemorrhage_.at(x, y), darkness * std::exp(-q * q * q * q));
          }
        }
      }
      for (int y = cy - 16; y <= cy + 16; ++y) {
        for (int x = cx - 16; x <= cx + 16; ++x) {
          if (hemorrhage_.contains(x, y) && hemorrhage_.at(x, y) >= 0.5 * darkness) hints_.push_back({x, y});
        }
      }
      return;
    }
  }

  void place_ma(BinaryRaster& labels) {
    const SyntheticContrast c = synthetic_contrast();
    for (int attempt = 0; attempt < 20000; ++attempt) {
      const double r = rng_.uniform(1.0, 2.5);
      const int cx = static_cast<int>(rng_.uniform(0.0, n_));
      const int cy = static_cast<int>(rng_.uniform(0.0, n_));
      if (!inside_fov(cx, cy, 20.0)) continue;
      if (disc_.at(cx, cy) > 0.01 || !clear_of_clutter(cx, cy, r + 8.0)) continue;
      const double amplitude = rng_.uniform(c.maMin, c.maMax);
      const double sigma = r;
      const int reach = static_cast<int>(std::ceil(r + 4.0));
      for (int y = cy - reach; y <= cy + reach; ++y) {
        for (int x = cx - reach; x <= cx + reach; ++x) {
          const double d2 = static_cast<double>((x - cx) * (x - cx) + (y - cy) * (y - cy));
          ma_.at(x, y) = std::max(ma_.at(x, y), amplitude * std::exp(-d2 / (2.0 * sigma * sigma)));
          if (d2 <= r * r) labels.at(x, y) = 1;
        }
      }
      ++placedMa_;
      return;
    }
    throw DataError("synthetic generator could not place microaneurysm " + std::to_string(placedMa_ + 1) +
                    "; image too crowded");
  }

  Image compose(const BinaryRaster& fov) {
    const double base[3] = {0.80 * rng_.uniform(0.95, 1.05), 0.42 * rng_.uniform(0.95, 1.05),
                            0.20 * rng_.uniform(0.95, 1.05)};
    const double gx = rng_.uniform(-0.06, 0.06);
    const double gy = rng_.uniform(-0.06, 0.06);
    Image img(n_, n_);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < n_; ++y) {
        for (int x = 0; x < n_; ++x) {
          double v = 0.0;
          if (fov.at(x, y)) {
            const double rho = std::hypot(x - center_, y - center_) / radius_;
            const double illumination = 1.0 - 0.22 * rho * rho + gx * (x - center_) / radius_ + gy * (y - center_) / radius_;
            const double dark = 1.0 - (1.0 - vessels_.strength.at(x, y)) * (1.0 - hemorrhage_.at(x, y)) *
                                          (1.0 - ma_.at(x, y));
            v = base[c] * illumination * (1.0 + kDiscBoost[c] * disc_.at(x, y)) * (1.0 - kChannelDarkening[c] * dark);
            v += cfg_.noiseLevel * rng_.normal();
          } else {
            v = 0.5 * cfg_.noiseLevel * std::abs(rng_.normal());
          }
          img.at(c, x, y) = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
        }
      }
    }
    return img;
  }

  SyntheticConfig cfg_;
  SeededRng rng_;
  int n_;
  double center_ = 0.0;
  double radius_ = 0.0;
  double discX_ = 0.0, discY_ = 0.0, discRadius_ = 1.0;
  VesselField vessels_;
  Raster<double> hemorrhage_;
  Raster<double> ma_;
  Raster<double> disc_;
  std::vector<Point> hints_;
  int nextSegment_ = 0;
  int placedMa_ = 0;
};

}  // namespace

SyntheticContrast synthetic_contrast() { return {}; }

AnnotatedImage synth_generate(const SyntheticConfig& cfg) {
  if (cfg.imageSize < 64) throw ConfigError("synthetic image size must be >= 64");
  if (cfg.maCount < 0 || cfg.vesselCount < 0 || cfg.hemorrhageCount < 0) {
    throw ConfigError("synthetic lesion and vessel counts must be >= 0");
  }
  if (cfg.noiseLevel < 0.0) throw ConfigError("synthetic noise level must be >= 0");
  Renderer renderer(cfg);
  return renderer.run();
}

}  // namespace madnet
