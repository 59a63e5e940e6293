#include "madnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "madnet/error.hpp"
#include "madnet/image_io.hpp"

namespace madnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::uint64_t pixel_key(int image, int x, int y) {
  return (static_cast<std::uint64_t>(image) << 40) | (static_cast<std::uint64_t>(y) << 20) |
         static_cast<std::uint64_t>(x);
}

}  // namespace

AnnotatedImage load_annotated(const std::filesystem::path& imagePath, const std::filesystem::path& labelPath,
                              const std::optional<std::filesystem::path>& maskPath, const MaskConfig& maskConfig) {
  AnnotatedImage out;
  out.name = imagePath.string();
  out.rgb = read_image(imagePath);
  out.labels = read_binary_raster(labelPath);
  const Raster<std::uint8_t> shape(out.rgb.width(), out.rgb.height());
  require_same_size(shape, out.labels, "image " + imagePath.string() + " vs label " + labelPath.string());
  if (maskPath) {
    out.fovMask = read_binary_raster(*maskPath);
    require_same_size(shape, out.fovMask, "image " + imagePath.string() + " vs mask " + maskPath->string());
  } else {
    out.fovMask = compute_mask(out.rgb, maskConfig);
  }
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (!out.fovMask.data[i]) out.labels.data[i] = 0;
  }
  return out;
}

std::map<std::string, std::vector<Point>> read_point_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point annotations " + path.string());
  std::map<std::string, std::vector<Point>> out;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_commas(line);
    try {
      if (fields.size() != 3 || fields[0].empty()) throw std::invalid_argument("field count");
      std::size_t used = 0;
      const int x = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("x");
      const int y = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("y");
      out[fields[0]].push_back({x, y});
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineNo) + ": expected `imageRelativePath,x,y`");
    }
  }
  return out;
}

BinaryRaster rasterize_points(const std::vector<Point>& points, int width, int height) {
  BinaryRaster out(width, height);
  for (const Point& p : points) {
    if (!out.contains(p.x, p.y)) {
      throw DataError("point annotation (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside " +
                      std::to_string(width) + "x" + std::to_string(height) + " image");
    }
    out.at(p.x, p.y) = 1;
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<ManifestEntry> out;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_commas(line);
    if (fields.empty() || fields.size() > 3 || fields[0].empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineNo) + ": expected `image,label,mask`");
    }
    ManifestEntry e;
    e.image = resolve(fields[0]);
    if (fields.size() > 1 && !fields[1].empty()) e.label = resolve(fields[1]);
    if (fields.size() > 2 && !fields[2].empty()) e.mask = resolve(fields[2]);
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(base).generic_string(); };
  for (const ManifestEntry& e : entries) {
    out << rel(e.image) << ',' << (e.label ? rel(*e.label) : "") << ',' << (e.mask ? rel(*e.mask) : "") << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

CatalogConfig default_catalog_config() { return {}; }

SampleCatalog build_catalog(const std::vector<AnnotatedImage>& images, const CatalogConfig& cfg) {
  if (images.empty()) throw DataError("cannot build a sample catalog from an empty image list");
  if (!(cfg.nonMaPerMa >= 0.0)) throw ConfigError("dataset.ma_ratio must be >= 0");
  if (!(cfg.hardNegativeFraction >= 0.0 && cfg.hardNegativeFraction <= 1.0)) {
    throw ConfigError("dataset.hard_negative_fraction must lie in [0, 1]");
  }
  const int n = static_cast<int>(images.size());
  SampleCatalog catalog;
  for (int i = 0; i < n; ++i) {
    const AnnotatedImage& img = images[i];
    require_same_size(img.labels, img.fovMask, img.name + " labels vs mask");
    for (int y = 0; y < img.labels.height; ++y) {
      for (int x = 0; x < img.labels.width; ++x) {
        if (img.labels.at(x, y) && img.fovMask.at(x, y)) catalog.maCenters.push_back({i, x, y, false});
      }
    }
  }
  if (catalog.maCenters.empty()) throw DataError("corpus contains no MA-labeled pixels inside the field of view");

  // Hard-negative pools per image: generator hints plus prefilter candidates.
  std::vector<std::vector<Point>> pools(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const AnnotatedImage& img = images[i];
      BinaryRaster hard = color_prefilter(img.rgb, img.fovMask, cfg.prefilter);
      for (const Point& p : img.hardNegativeHints) {
        if (hard.contains(p.x, p.y) && img.fovMask.at(p.x, p.y)) hard.at(p.x, p.y) = 1;
      }
      for (int y = 0; y < hard.height; ++y) {
        for (int x = 0; x < hard.width; ++x) {
          if (hard.at(x, y) && !img.labels.at(x, y)) pools[i].push_back({x, y});
        }
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SeededRng rng(cfg.seed);
  const auto target = static_cast<std::size_t>(std::llround(cfg.nonMaPerMa * catalog.maCenters.size()));
  const auto hardTarget = static_cast<std::size_t>(std::llround(cfg.hardNegativeFraction * target));

  std::vector<CatalogEntry> hardPool;
  for (int i = 0; i < n; ++i) {
    for (const Point& p : pools[i]) hardPool.push_back({i, p.x, p.y, true});
  }
  const std::size_t hardCount = std::min(hardTarget, hardPool.size());
  for (std::size_t k = 0; k < hardCount; ++k) {
    std::swap(hardPool[k], hardPool[k + rng.index(hardPool.size() - k)]);
  }
  std::unordered_set<std::uint64_t> used;
  for (std::size_t k = 0; k < hardCount; ++k) {
    catalog.nonMaCenters.push_back(hardPool[k]);
    used.insert(pixel_key(hardPool[k].imageIndex, hardPool[k].x, hardPool[k].y));
  }

  // Remaining quota: uniform over in-mask, non-MA pixels of the whole corpus.
  std::vector<std::size_t> cumulative(n + 1, 0);
  std::vector<std::vector<Point>> inMask(n);
  for (int i = 0; i < n; ++i) {
    const AnnotatedImage& img = images[i];
    for (int y = 0; y < img.fovMask.height; ++y) {
      for (int x = 0; x < img.fovMask.width; ++x) {
        if (img.fovMask.at(x, y) && !img.labels.at(x, y)) inMask[i].push_back({x, y});
      }
    }
    cumulative[i + 1] = cumulative[i] + inMask[i].size();
  }
  const std::size_t available = cumulative[n] - hardCount;
  const std::size_t wanted = std::min(target - hardCount, available);
  std::size_t attempts = 0;
  while (catalog.nonMaCenters.size() < hardCount + wanted) {
    if (++attempts > 100 * (wanted + 1000)) throw DataError("could not draw enough distinct non-MA centers");
    const std::size_t r = rng.index(cumulative[n]);
    const int img = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin()) - 1;
    const Point p = inMask[img][r - cumulative[img]];
    if (!used.insert(pixel_key(img, p.x, p.y)).second) continue;
    catalog.nonMaCenters.push_back({img, p.x, p.y, false});
  }
  return catalog;
}

std::vector<int> split_validation(int imageCount, double validationFraction, std::uint64_t seed) {
  if (!(validationFraction >= 0.0 && validationFraction < 1.0)) {
    throw ConfigError("dataset.validation_fraction must lie in [0, 1)");
  }
  std::vector<int> order(imageCount);
  for (int i = 0; i < imageCount; ++i) order[i] = i;
  SeededRng rng(seed);
  for (int i = imageCount - 1; i > 0; --i) std::swap(order[i], order[rng.index(static_cast<std::size_t>(i) + 1)]);
  const auto count = static_cast<std::size_t>(std::llround(validationFraction * imageCount));
  std::vector<int> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(count, order.size())));
  std::sort(out.begin(), out.end());
  return out;
}

BatchSampler::BatchSampler(const std::vector<AnnotatedImage>& images, const SampleCatalog& catalog, SamplerConfig cfg,
                           std::uint64_t seed)
    : images_(images), catalog_(catalog), cfg_(std::move(cfg)), rng_(seed) {
  if (!(cfg_.maFraction > 0.0 && cfg_.maFraction < 1.0)) throw ConfigError("ma_fraction must lie in (0, 1)");
  if (cfg_.batchSize < 1) throw ConfigError("batch size must be positive");
  cfg_.sampling.validate(cfg_.windowSide);
  const auto maPerBatch = std::lround(cfg_.batchSize * cfg_.maFraction);
  if (maPerBatch > 0 && catalog_.maCenters.empty()) throw DataError("batch sampler: catalog has no MA centers");
  if (maPerBatch < cfg_.batchSize && catalog_.nonMaCenters.empty()) {
    throw DataError("batch sampler: catalog has no non-MA centers");
  }
}

std::vector<Window> BatchSampler::next_batch() {
  struct Draw {
    CatalogEntry entry;
    Label label;
    int variant;
    double angle;
  };
  const auto maPerBatch = static_cast<int>(std::lround(cfg_.batchSize * cfg_.maFraction));
  std::vector<Draw> draws(cfg_.batchSize);
  for (int i = 0; i < cfg_.batchSize; ++i) {
    const bool ma = i < maPerBatch;
    const auto& pool = ma ? catalog_.maCenters : catalog_.nonMaCenters;
    draws[i].entry = pool[rng_.index(pool.size())];
    draws[i].label = ma ? Label::MA : Label::nonMA;
    draws[i].variant = static_cast<int>(rng_.index(6));
    draws[i].angle = cfg_.rotate ? rng_.uniform(0.0, 360.0) : 0.0;
  }
  std::vector<Window> batch(cfg_.batchSize);
  std::vector<std::exception_ptr> errors(cfg_.batchSize);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < cfg_.batchSize; ++i) {
    try {
      const Draw& d = draws[i];
      Window w = extract_window(images_[d.entry.imageIndex].rgb, d.entry.x, d.entry.y, cfg_.windowSide);
      if (cfg_.rotate) w = rotate_augment(w, d.angle);
      w = augment_variant(w, d.variant, cfg_.foveation, cfg_.sampling);
      w.label = d.label;
      w.imageIndex = d.entry.imageIndex;
      batch[i] = std::move(w);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return batch;
}

}  // namespace madnet
