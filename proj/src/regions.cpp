#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "madnet/detection.hpp"

namespace madnet {

namespace {

long long cross(const Point& o, const Point& a, const Point& b) {
  return static_cast<long long>(a.x - o.x) * (b.y - o.y) - static_cast<long long>(a.y - o.y) * (b.x - o.x);
}

}  // namespace

std::vector<Point> convex_hull(std::vector<Point> points) {
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() <= 2) return points;
  std::vector<Point> hull(2 * points.size());
  std::size_t k = 0;
  for (const Point& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = points.size() - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double hull_lattice_area(const std::vector<Point>& hull) {
  if (hull.empty()) return 0.0;
  if (hull.size() == 1) return 1.0;
  const std::size_t n = hull.size();
  long long twiceArea = 0;
  long long boundary = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = hull[i];
    const Point& b = hull[(i + 1) % n];
    twiceArea += static_cast<long long>(a.x) * b.y - static_cast<long long>(b.x) * a.y;
    boundary += std::gcd(std::abs(b.x - a.x), std::abs(b.y - a.y));
  }
  if (n == 2) return static_cast<double>(boundary / 2 + 1);
  return std::abs(static_cast<double>(twiceArea)) / 2.0 + static_cast<double>(boundary) / 2.0 + 1.0;
}

Region make_region(std::vector<Point> pixels) {
  std::sort(pixels.begin(), pixels.end(), [](const Point& a, const Point& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  Region r;
  r.area = static_cast<int>(pixels.size());
  r.hullArea = hull_lattice_area(convex_hull(pixels));
  r.convexity = r.hullArea > 0.0 ? r.area / r.hullArea : 0.0;
  r.pixels = std::move(pixels);
  return r;
}

std::vector<Region> connected_components(const BinaryRaster& foreground) {
  std::vector<Region> out;
  std::vector<std::uint8_t> seen(foreground.size(), 0);
  std::vector<Point> stack;
  for (int y = 0; y < foreground.height; ++y) {
    for (int x = 0; x < foreground.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * foreground.width + x;
      if (!foreground.data[idx] || seen[idx]) continue;
      std::vector<Point> pixels;
      seen[idx] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        pixels.push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (!foreground.contains(nx, ny)) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * foreground.width + nx;
            if (foreground.data[n] && !seen[n]) {
              seen[n] = 1;
              stack.push_back({nx, ny});
            }
          }
        }
      }
      out.push_back(make_region(std::move(pixels)));
    }
  }
  return out;
}

std::vector<Region> region_filter(const std::vector<Region>& regions, const PostprocessConfig& cfg) {
  std::vector<Region> out;
  for (const Region& r : regions) {
    if (r.area <= cfg.maxArea && r.convexity >= cfg.minConvexity) out.push_back(r);
  }
  return out;
}

BinaryRaster threshold_map(const ProbabilityMap& map, double threshold) {
  BinaryRaster out(map.width, map.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = !map.skipped[i] && map.prob[i] >= threshold ? 1 : 0;
  }
  return out;
}

std::vector<Region> postprocess(const ProbabilityMap& map, const PostprocessConfig& cfg) {
  std::vector<Region> regions = connected_components(threshold_map(map, cfg.probThreshold));
  for (Region& r : regions) {
    double sum = 0.0;
    for (const Point& p : r.pixels) sum += map.at(p.x, p.y);
    r.meanProb = sum / r.area;
  }
  return region_filter(regions, cfg);
}

BinaryRaster regions_to_raster(const std::vector<Region>& regions, int width, int height) {
  BinaryRaster out(width, height);
  for (const Region& r : regions) {
    for (const Point& p : r.pixels) {
      if (out.contains(p.x, p.y)) out.at(p.x, p.y) = 1;
    }
  }
  return out;
}

}  // namespace madnet
