#include "madnet/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <iterator>

#include "madnet/error.hpp"
#include "madnet/image_io.hpp"
#include "madnet/kernels.hpp"

namespace madnet {

namespace {

Raster<double> median_filter(const Raster<double>& in, int size) {
  if (size <= 1) return in;
  const int r = size / 2;
  Raster<double> out(in.width, in.height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < in.height; ++y) {
    std::vector<double> buf(static_cast<std::size_t>(size) * size);
    for (int x = 0; x < in.width; ++x) {
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = reflect_index(y + dy, in.height);
        for (int dx = -r; dx <= r; ++dx) buf[k++] = in.at(reflect_index(x + dx, in.width), sy);
      }
      auto mid = buf.begin() + static_cast<std::ptrdiff_t>(k / 2);
      std::nth_element(buf.begin(), mid, buf.begin() + static_cast<std::ptrdiff_t>(k));
      out.at(x, y) = *mid;
    }
  }
  return out;
}

BinaryRaster erode_disc(const BinaryRaster& in, int radius) {
  if (radius <= 0) return in;
  const int w = in.width;
  const int h = in.height;
  // Per-row prefix counts of background pixels.
  std::vector<int> prefix(static_cast<std::size_t>(w + 1) * h, 0);
  for (int y = 0; y < h; ++y) {
    int* row = &prefix[static_cast<std::size_t>(y) * (w + 1)];
    for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (in.at(x, y) ? 0 : 1);
  }
  std::vector<int> halfWidth(radius + 1);
  for (int dy = 0; dy <= radius; ++dy) {
    halfWidth[dy] = static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
  }
  BinaryRaster out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in.at(x, y)) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        const int hw = halfWidth[std::abs(dy)];
        const int sy = y + dy;
        if (sy < 0 || sy >= h || x - hw < 0 || x + hw >= w) {
          keep = false;
          break;
        }
        const int* row = &prefix[static_cast<std::size_t>(sy) * (w + 1)];
        if (row[x + hw + 1] - row[x - hw] > 0) keep = false;
      }
      out.at(x, y) = keep ? 1 : 0;
    }
  }
  return out;
}

// Inclusive rectangle sums from a (w+1)x(h+1) integral image.
struct Integral {
  int w = 0;
  int h = 0;
  std::vector<double> s;

  Integral(int width, int height) : w(width), h(height), s(static_cast<std::size_t>(width + 1) * (height + 1), 0.0) {}
  double& cell(int x, int y) { return s[static_cast<std::size_t>(y) * (w + 1) + x]; }
  double cell(int x, int y) const { return s[static_cast<std::size_t>(y) * (w + 1) + x]; }
  void build(const std::function<double(int, int)>& value) {
    for (int y = 0; y < h; ++y) {
      double run = 0.0;
      for (int x = 0; x < w; ++x) {
        run += value(x, y);
        cell(x + 1, y + 1) = cell(x + 1, y) + run;
      }
    }
  }
  double sum(int x0, int y0, int x1, int y1) const {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, w - 1);
    y1 = std::min(y1, h - 1);
    return cell(x1 + 1, y1 + 1) - cell(x0, y1 + 1) - cell(x1 + 1, y0) + cell(x0, y0);
  }
};

template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const GeometryError& e) {
    throw GeometryError(stage + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(stage + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const Error& e) {
    throw Error(stage + ": " + e.what());
  }
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr char kMapMagic[6] = {'M', 'A', 'P', 'F', '1', '\0'};

}  // namespace

BinaryRaster compute_mask(const Image& image, const MaskConfig& cfg) {
  if (cfg.medianSize < 1 || cfg.medianSize % 2 == 0) throw ConfigError("mask median size must be a positive odd number");
  if (cfg.erosionRadius < 0) throw ConfigError("mask erosion radius must be >= 0");
  const Raster<double> lum = median_filter(image.luminance(), cfg.medianSize);
  BinaryRaster mask(lum.width, lum.height);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] = lum.data[i] > cfg.luminanceThreshold ? 1 : 0;
  return erode_disc(mask, cfg.erosionRadius);
}

BinaryRaster color_prefilter(const Image& image, const BinaryRaster& mask, const PrefilterConfig& cfg) {
  require_same_size(Raster<std::uint8_t>(image.width(), image.height()), mask, "prefilter image vs mask");
  if (cfg.neighborhood < 1 || cfg.neighborhood % 2 == 0) {
    throw ConfigError("prefilter neighborhood must be a positive odd number");
  }
  if (cfg.smoothing < 1 || cfg.smoothing % 2 == 0) throw ConfigError("prefilter smoothing must be a positive odd number");
  const int w = image.width();
  const int h = image.height();
  auto in = [&](int x, int y) { return mask.at(x, y) ? 1.0 : 0.0; };
  auto g = [&](int x, int y) { return mask.at(x, y) ? image.at(1, x, y) : 0.0; };
  Integral count(w, h), sum(w, h), sq(w, h);
  count.build(in);
  sum.build(g);
  sq.build([&](int x, int y) { const double v = g(x, y); return v * v; });
  const int r = cfg.neighborhood / 2;
  const int s = cfg.smoothing / 2;
  BinaryRaster out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const double n = count.sum(x - r, y - r, x + r, y + r);
      const double mean = sum.sum(x - r, y - r, x + r, y + r) / n;
      const double var = sq.sum(x - r, y - r, x + r, y + r) / n - mean * mean;
      const double sd = std::sqrt(std::max(0.0, var));
      const double value = sum.sum(x - s, y - s, x + s, y + s) / count.sum(x - s, y - s, x + s, y + s);
      out.at(x, y) = value < mean - cfg.kappa * sd - 1e-9 ? 1 : 0;
    }
  }
  return out;
}

double window_probability(const Image& image, int x, int y, const NetworkState& state, const NetworkSpec& spec,
                          const InferenceConfig& cfg) {
  const Window win = extract_window(image, x, y, spec.input_side());
  switch (cfg.transform) {
    case WindowTransform::raw:
      return predict_proba(state, spec, win.pixels);
    case WindowTransform::foveate:
      return predict_proba(state, spec, foveate(win, cfg.foveation).pixels);
    case WindowTransform::sample:
      return predict_proba(state, spec, nonuniform_sample(win, cfg.sampling).pixels);
    case WindowTransform::both:
      return 0.5 * (predict_proba(state, spec, foveate(win, cfg.foveation).pixels) +
                    predict_proba(state, spec, nonuniform_sample(win, cfg.sampling).pixels));
  }
  throw ConfigError("unknown window transform");
}

ProbabilityMap sliding_window_inference(const Image& image, const BinaryRaster& candidates, const NetworkState& state,
                                        const NetworkSpec& spec, const InferenceConfig& cfg) {
  require_same_size(Raster<std::uint8_t>(image.width(), image.height()), candidates, "inference image vs candidates");
  cfg.sampling.validate(spec.input_side());
  ProbabilityMap map(image.width(), image.height());
  std::vector<Point> todo;
  for (int y = 0; y < candidates.height; ++y) {
    for (int x = 0; x < candidates.width; ++x) {
      if (candidates.at(x, y)) todo.push_back({x, y});
    }
  }
  const int n = static_cast<int>(todo.size());
  std::exception_ptr firstError;
  int errorIndex = n;
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n; ++i) {
    const Point p = todo[i];
    try {
      const double prob = window_probability(image, p.x, p.y, state, spec, cfg);
      const std::size_t idx = static_cast<std::size_t>(p.y) * map.width + p.x;
      map.prob[idx] = prob;
      map.skipped[idx] = 0;
    } catch (...) {
#pragma omp critical(madnet_inference_error)
      if (i < errorIndex) {
        errorIndex = i;
        firstError = std::current_exception();
      }
    }
  }
  if (firstError) {
    const Point p = todo[errorIndex];
    const std::string where = "window at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
    with_stage(where, [&]() -> int { std::rethrow_exception(firstError); });
  }
  return map;
}

DetectionResult detect(const Image& image, const NetworkState& state, const NetworkSpec& spec,
                       const DetectionConfig& cfg) {
  DetectionResult r;
  r.mask = with_stage("mask", [&] { return compute_mask(image, cfg.mask); });
  r.candidates = with_stage("prefilter", [&] { return color_prefilter(image, r.mask, cfg.prefilter); });
  r.map = with_stage("inference", [&] { return sliding_window_inference(image, r.candidates, state, spec, cfg.inference); });
  r.regions = with_stage("postprocess", [&] { return postprocess(r.map, cfg.postprocess); });
  return r;
}

void write_probability_map(const std::filesystem::path& path, const ProbabilityMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write probability map " + path.string());
  out.write(kMapMagic, sizeof kMapMagic);
  put_u32(out, static_cast<std::uint32_t>(map.width));
  put_u32(out, static_cast<std::uint32_t>(map.height));
  for (const double p : map.prob) {
    const float f = static_cast<float>(p);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  if (!out) throw DataError("failed writing probability map " + path.string());
}

ProbabilityMap read_probability_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open probability map " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 14 || std::memcmp(bytes.data(), kMapMagic, 6) != 0) {
    throw DataError(path.string() + " is not a probability map");
  }
  const auto w = get_u32(&bytes[6]);
  const auto h = get_u32(&bytes[10]);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (w == 0 || h == 0 || bytes.size() != 14 + 4 * n) throw DataError(path.string() + ": truncated probability map");
  ProbabilityMap map(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(&bytes[14 + 4 * i]);
    float f;
    std::memcpy(&f, &bits, 4);
    map.prob[i] = f;
    map.skipped[i] = f == 0.0f ? 1 : 0;
  }
  return map;
}

void write_probability_pgm(const std::filesystem::path& path, const ProbabilityMap& map) {
  Raster<std::uint16_t> r(map.width, map.height);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.data[i] = static_cast<std::uint16_t>(std::lround(std::clamp(map.prob[i], 0.0, 1.0) * 65535.0));
  }
  write_pgm16(path, r);
}

std::string format_regions(const std::string& imagePath, const std::vector<Region>& regions) {
  std::string out = "# image: " + imagePath + "\n";
  for (const Region& r : regions) {
    double sx = 0.0;
    double sy = 0.0;
    for (const Point& p : r.pixels) {
      sx += p.x;
      sy += p.y;
    }
    char line[128];
    std::snprintf(line, sizeof line, "%ld,%ld,%d,%.4f,%.6f\n", std::lround(sx / r.area), std::lround(sy / r.area), r.area,
                  r.convexity, r.meanProb);
    out += line;
  }
  return out;
}

void write_regions(const std::filesystem::path& path, const std::string& imagePath, const std::vector<Region>& regions) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write regions " + path.string());
  out << format_regions(imagePath, regions);
  if (!out) throw DataError("failed writing regions " + path.string());
}

}  // namespace madnet
