#include <gtest/gtest.h>

#include <fstream>
#include <numeric>

#include "madnet/dataset.hpp"
#include "madnet/detection.hpp"
#include "madnet/error.hpp"
#include "test_support.hpp"

using namespace madnet;

namespace {

BinaryRaster from_strings(const std::vector<std::string>& rows) {
  BinaryRaster r(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) r.at(x, y) = rows[y][x] == '#' ? 1 : 0;
  }
  return r;
}

Region region_of(std::vector<Point> pts) { return make_region(std::move(pts)); }

long cross(Point o, Point a, Point b) {
  return static_cast<long>(a.x - o.x) * (b.y - o.y) - static_cast<long>(a.y - o.y) * (b.x - o.x);
}

// Lattice points in the hull: intersection of every supporting half-plane with the bounding box.
int brute_hull_points(const std::vector<Point>& pts) {
  int x0 = pts[0].x, x1 = x0, y0 = pts[0].y, y1 = y0;
  for (const Point& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  std::vector<std::pair<Point, Point>> support;
  for (const Point& a : pts) {
    for (const Point& b : pts) {
      if (a == b) continue;
      bool ok = true;
      for (const Point& c : pts) ok &= cross(a, b, c) >= 0;
      if (ok) support.emplace_back(a, b);
    }
  }
  int count = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool inside = true;
      for (const auto& [a, b] : support) inside &= cross(a, b, {x, y}) >= 0;
      count += inside;
    }
  }
  return count;
}

// Union-find labeling, independent of the scan-and-stack implementation.
std::vector<int> union_find_labels(const BinaryRaster& r) {
  std::vector<int> parent(r.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      if (!r.at(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (r.contains(x + dx, y + dy) && r.at(x + dx, y + dy)) {
            parent[find(y * r.width + x)] = find((y + dy) * r.width + x + dx);
          }
        }
      }
    }
  }
  std::vector<int> label(r.size(), -1);
  for (int i = 0; i < static_cast<int>(r.size()); ++i) {
    if (r.data[i]) label[i] = find(i);
  }
  return label;
}

ProbabilityMap map_from(const std::vector<std::vector<double>>& rows) {
  ProbabilityMap m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      m.prob[y * m.width + x] = rows[y][x];
      m.skipped[y * m.width + x] = rows[y][x] == 0.0;
    }
  }
  return m;
}

AnnotatedImage small_synth(int size, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.imageSize = size;
  sc.maCount = 3;
  sc.vesselCount = 3;
  sc.hemorrhageCount = 1;
  sc.seed = seed;
  return synth_generate(sc);
}

NetworkSpec small_net() { return build_network(compact_architecture(4, 8, 2, DropProfile::none())); }

InferenceConfig small_inference() {
  InferenceConfig cfg;
  cfg.foveation = default_foveation(33);
  cfg.sampling = default_sampling_grid(33);
  return cfg;
}

}  // namespace

TEST(Mask, BlackImageEmpty) {
  const BinaryRaster m = compute_mask(Image(40, 30, 0.0));
  EXPECT_EQ(m, BinaryRaster(40, 30, 0));
}

TEST(Mask, BrightImageLosesErosionMargin) {
  const BinaryRaster m = compute_mask(Image(40, 30, 1.0));
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      const bool expected = x >= 8 && x <= 31 && y >= 8 && y <= 21;
      ASSERT_EQ(m.at(x, y), expected ? 1 : 0) << x << "," << y;
    }
  }
}

TEST(Mask, SyntheticFieldOfViewIoU) {
  MaskConfig cfg;
  cfg.erosionRadius = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticConfig sc;
    sc.seed = seed;
    const AnnotatedImage img = synth_generate(sc);
    const BinaryRaster m = compute_mask(img.rgb, cfg);
    long inter = 0;
    long uni = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      inter += m.data[i] && img.fovMask.data[i];
      uni += m.data[i] || img.fovMask.data[i];
    }
    EXPECT_GE(static_cast<double>(inter) / uni, 0.98) << seed;
  }
}

TEST(Mask, ErosionMatchesBruteForceDisc) {
  const AnnotatedImage img = small_synth(96, 4);
  MaskConfig noErode;
  noErode.erosionRadius = 0;
  const BinaryRaster raw = compute_mask(img.rgb, noErode);
  for (int radius : {1, 3, 8}) {
    MaskConfig cfg;
    cfg.erosionRadius = radius;
    const BinaryRaster eroded = compute_mask(img.rgb, cfg);
    for (int y = 0; y < raw.height; ++y) {
      for (int x = 0; x < raw.width; ++x) {
        bool keep = true;
        for (int dy = -radius; dy <= radius && keep; ++dy) {
          for (int dx = -radius; dx <= radius && keep; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            keep = raw.contains(x + dx, y + dy) && raw.at(x + dx, y + dy);
          }
        }
        ASSERT_EQ(eroded.at(x, y), keep ? 1 : 0) << radius << " at " << x << "," << y;
      }
    }
  }
}

TEST(Mask, MedianRemovesIsolatedSpeck) {
  Image img(30, 30, 0.0);
  for (int c = 0; c < 3; ++c) img.at(c, 15, 15) = 1.0;
  MaskConfig cfg;
  cfg.erosionRadius = 0;
  EXPECT_EQ(compute_mask(img, cfg), BinaryRaster(30, 30, 0));
}

TEST(Prefilter, UniformImageHasNoCandidates) {
  const Image img(50, 50, 0.4);
  EXPECT_EQ(color_prefilter(img, BinaryRaster(50, 50, 1)), BinaryRaster(50, 50, 0));
}

TEST(Prefilter, MatchesDirectNeighborhoodStatistics) {
  SeededRng rng(3);
  Image img(25, 20);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 25; ++x) img.at(c, x, y) = rng.uniform();
    }
  }
  BinaryRaster mask(25, 20, 1);
  for (int y = 0; y < 20; ++y) mask.at(0, y) = mask.at(1, y) = 0;
  PrefilterConfig cfg;
  cfg.neighborhood = 7;
  cfg.kappa = 0.3;
  const BinaryRaster cand = color_prefilter(img, mask, cfg);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 25; ++x) {
      double s = 0.0, s2 = 0.0;
      int n = 0;
      for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) {
          if (!mask.contains(x + dx, y + dy) || !mask.at(x + dx, y + dy)) continue;
          const double v = img.at(1, x + dx, y + dy);
          s += v;
          s2 += v * v;
          ++n;
        }
      }
      const double mean = s / n;
      const double sd = std::sqrt(std::max(0.0, s2 / n - mean * mean));
      const bool expected = mask.at(x, y) && img.at(1, x, y) < mean - cfg.kappa * sd - 1e-9;
      ASSERT_EQ(cand.at(x, y), expected ? 1 : 0) << x << "," << y;
    }
  }
}

TEST(Prefilter, KeepsEverySyntheticMicroaneurysmPixel) {
  long kept = 0;
  long total = 0;
  long candidates = 0;
  long masked = 0;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    SyntheticConfig sc;
    sc.seed = seed;
    const AnnotatedImage img = synth_generate(sc);
    const BinaryRaster mask = compute_mask(img.rgb);
    const BinaryRaster cand = color_prefilter(img.rgb, mask);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (img.labels.data[i] && mask.data[i]) {
        ++total;
        kept += cand.data[i];
      }
      candidates += cand.data[i];
      masked += mask.data[i];
    }
  }
  EXPECT_GT(total, 0);
  EXPECT_EQ(kept, total);
  EXPECT_LT(static_cast<double>(candidates) / masked, 0.20);
}

TEST(Prefilter, BadConfig) {
  const Image img(10, 10, 0.4);
  PrefilterConfig cfg;
  cfg.neighborhood = 4;
  EXPECT_THROW(color_prefilter(img, BinaryRaster(10, 10, 1), cfg), ConfigError);
  EXPECT_THROW(color_prefilter(img, BinaryRaster(11, 10, 1)), DataError);
}

TEST(Components, SinglePixel) {
  const auto regions = connected_components(from_strings({"...", ".#.", "..."}));
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].area, 1);
  EXPECT_EQ(regions[0].convexity, 1.0);
}

TEST(Components, FilledSquare) {
  const auto regions = connected_components(from_strings({".....", ".###.", ".###.", ".###.", "....."}));
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].area, 9);
  EXPECT_EQ(regions[0].hullArea, 9.0);
  EXPECT_EQ(regions[0].convexity, 1.0);
}

TEST(Components, LShapeIsNotConvex) {
  const Region r = region_of({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_EQ(r.area, 9);
  EXPECT_EQ(r.hullArea, brute_hull_points(r.pixels));
  EXPECT_EQ(r.hullArea, 15.0);
  EXPECT_LT(r.convexity, 0.8);
}

TEST(Components, StraightAndDiagonalLines) {
  std::vector<Point> row;
  std::vector<Point> diag;
  for (int i = 0; i < 10; ++i) {
    row.push_back({i, 3});
    diag.push_back({i, i});
  }
  EXPECT_EQ(region_of(row).convexity, 1.0);
  EXPECT_EQ(region_of(row).area, 10);
  EXPECT_EQ(region_of(diag).convexity, 1.0);
}

TEST(Components, DiagonalNeighborsJoin) {
  const auto regions = connected_components(from_strings({"#..", ".#.", "..#", "...", "#.#"}));
  ASSERT_EQ(regions.size(), 3u);
  EXPECT_EQ(regions[0].area, 3);
  EXPECT_EQ(regions[1].pixels, (std::vector<Point>{{0, 4}}));
}

TEST(Components, HullMatchesBruteForceOnRandomSets) {
  SeededRng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Point> pts;
    const int n = 1 + static_cast<int>(rng.index(12));
    for (int i = 0; i < n; ++i) pts.push_back({static_cast<int>(rng.index(7)), static_cast<int>(rng.index(7))});
    const Region r = region_of(pts);
    ASSERT_EQ(r.hullArea, brute_hull_points(r.pixels)) << "trial " << trial;
    ASSERT_GE(r.hullArea, r.area);
    ASSERT_GT(r.convexity, 0.0);
    ASSERT_LE(r.convexity, 1.0);
  }
}

TEST(Components, PartitionMatchesUnionFind) {
  SeededRng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryRaster r(31, 23);
    for (auto& v : r.data) v = rng.bernoulli(0.35);
    const auto regions = connected_components(r);
    const auto oracle = union_find_labels(r);
    std::vector<int> mine(r.size(), -1);
    std::size_t covered = 0;
    for (std::size_t k = 0; k < regions.size(); ++k) {
      for (const Point& p : regions[k].pixels) {
        const std::size_t i = static_cast<std::size_t>(p.y) * r.width + p.x;
        ASSERT_EQ(mine[i], -1) << "pixel in two regions";
        mine[i] = static_cast<int>(k);
        ++covered;
      }
    }
    EXPECT_EQ(covered, static_cast<std::size_t>(std::count(r.data.begin(), r.data.end(), 1)));
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t j = i + 1; j < r.size() && r.data[i]; ++j) {
        if (!r.data[j]) continue;
        ASSERT_EQ(mine[i] == mine[j], oracle[i] == oracle[j]);
      }
    }
  }
}

TEST(RegionFilter, AreaAndConvexityRule) {
  std::vector<Point> blob;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) blob.push_back({x, y});
  }
  std::vector<Point> square;
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) square.push_back({x + 10, y});
  }
  std::vector<Point> line;
  for (int i = 0; i < 10; ++i) line.push_back({i, 20});
  const std::vector<Region> regions{region_of(blob), region_of(square), region_of(line),
                                    region_of({{0, 30}, {1, 30}, {2, 30}, {3, 30}, {4, 30}, {0, 31}, {0, 32}, {0, 33}, {0, 34}})};
  const auto kept = region_filter(regions, {});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].area, 9);
  EXPECT_EQ(kept[1].area, 10);
  PostprocessConfig loose;
  loose.maxArea = 25;
  EXPECT_EQ(region_filter(regions, loose).size(), 3u);
}

TEST(Postprocess, ThresholdSkipsFlaggedPixels) {
  ProbabilityMap m = map_from({{0.9, 0.2, 0.0}, {0.6, 0.0, 0.7}});
  m.skipped[1] = 1;
  const BinaryRaster t = threshold_map(m, 0.5);
  EXPECT_EQ(t.data, (std::vector<std::uint8_t>{1, 0, 0, 1, 0, 1}));
  const auto regions = postprocess(m, {});
  ASSERT_EQ(regions.size(), 2u);
  EXPECT_NEAR(regions[0].meanProb, 0.75, 1e-12);
  EXPECT_NEAR(regions[1].meanProb, 0.7, 1e-12);
}

TEST(Postprocess, IsolatedPeaksAreMonotoneInThreshold) {
  ProbabilityMap m(40, 40);
  SeededRng rng(7);
  for (int cy = 4; cy < 40; cy += 10) {
    for (int cx = 4; cx < 40; cx += 10) {
      const double peak = rng.uniform(0.3, 1.0);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const std::size_t i = static_cast<std::size_t>(cy + dy) * 40 + cx + dx;
          m.prob[i] = peak * (dx == 0 && dy == 0 ? 1.0 : 0.7);
          m.skipped[i] = 0;
        }
      }
    }
  }
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double t = 0.05; t < 1.0; t += 0.05) {
    PostprocessConfig cfg;
    cfg.probThreshold = t;
    const std::size_t n = postprocess(m, cfg).size();
    EXPECT_LE(n, previous) << t;
    previous = n;
  }
}

TEST(Postprocess, AcceptedCountCanRiseWithThreshold) {
  // A 5x5 plateau is too large at 0.5; at 0.8 only its two bright corners survive.
  std::vector<std::vector<double>> rows(7, std::vector<double>(7, 0.0));
  for (int y = 1; y <= 5; ++y) {
    for (int x = 1; x <= 5; ++x) rows[y][x] = 0.6;
  }
  rows[1][1] = 0.9;
  rows[5][5] = 0.9;
  const ProbabilityMap m = map_from(rows);
  PostprocessConfig low;
  PostprocessConfig high;
  high.probThreshold = 0.8;
  EXPECT_EQ(postprocess(m, low).size(), 0u);
  EXPECT_EQ(postprocess(m, high).size(), 2u);
  EXPECT_EQ(connected_components(threshold_map(m, 0.5)).size(), 1u);
}

TEST(Inference, ZeroCandidatesGiveEmptyMap) {
  const NetworkSpec spec = small_net();
  const NetworkState state = zero_state(spec);
  const ProbabilityMap m =
      sliding_window_inference(Image(20, 20, 0.5), BinaryRaster(20, 20, 0), state, spec, small_inference());
  EXPECT_EQ(m.prob, std::vector<double>(400, 0.0));
  EXPECT_EQ(m.skipped, std::vector<std::uint8_t>(400, 1));
}

TEST(Inference, SpotCheckAgainstDirectPrediction) {
  const NetworkSpec spec = small_net();
  SeededRng rng(8);
  const NetworkState state = init_state(spec, rng);
  const AnnotatedImage img = small_synth(128, 9);
  BinaryRaster cand(128, 128, 0);
  std::vector<Point> picks;
  while (picks.size() < 100) {
    const Point p{static_cast<int>(rng.index(128)), static_cast<int>(rng.index(128))};
    if (cand.at(p.x, p.y)) continue;
    cand.at(p.x, p.y) = 1;
    picks.push_back(p);
  }
  const InferenceConfig cfg = small_inference();
  const ProbabilityMap m = sliding_window_inference(img.rgb, cand, state, spec, cfg);
  for (const Point& p : picks) {
    const Window w = extract_window(img.rgb, p.x, p.y, 33);
    const double direct = 0.5 * (predict_proba(state, spec, foveate(w, cfg.foveation).pixels) +
                                 predict_proba(state, spec, nonuniform_sample(w, cfg.sampling).pixels));
    EXPECT_EQ(m.at(p.x, p.y), direct);
    EXPECT_EQ(m.skipped[static_cast<std::size_t>(p.y) * 128 + p.x], 0);
  }
  InferenceConfig raw = cfg;
  raw.transform = WindowTransform::raw;
  EXPECT_EQ(window_probability(img.rgb, 5, 6, state, spec, raw),
            predict_proba(state, spec, extract_window(img.rgb, 5, 6, 33).pixels));
  EXPECT_EQ(sliding_window_inference(img.rgb, cand, state, spec, cfg), m);
}

TEST(Detect, BlankImageHasNoRegions) {
  const NetworkSpec spec = small_net();
  SeededRng rng(10);
  DetectionConfig cfg;
  cfg.inference = small_inference();
  const DetectionResult r = detect(Image(64, 64, 0.0), init_state(spec, rng), spec, cfg);
  EXPECT_TRUE(r.regions.empty());
  EXPECT_EQ(r.candidates, BinaryRaster(64, 64, 0));
}

TEST(Detect, DeterministicAndRegionsObeyFilter) {
  const NetworkSpec spec = small_net();
  SeededRng rng(11);
  NetworkState state = init_state(spec, rng);
  state.layers.back().bias[1] = 1.0;
  const AnnotatedImage img = small_synth(128, 12);
  DetectionConfig cfg;
  cfg.inference = small_inference();
  const DetectionResult a = detect(img.rgb, state, spec, cfg);
  const DetectionResult b = detect(img.rgb, state, spec, cfg);
  EXPECT_EQ(a.map, b.map);
  EXPECT_EQ(a.regions.size(), b.regions.size());
  for (const Region& r : a.regions) {
    EXPECT_LE(r.area, cfg.postprocess.maxArea);
    EXPECT_GE(r.convexity, cfg.postprocess.minConvexity);
  }
  for (std::size_t i = 0; i < a.map.prob.size(); ++i) {
    if (a.map.skipped[i]) ASSERT_EQ(a.map.prob[i], 0.0);
    ASSERT_GE(a.map.prob[i], 0.0);
    ASSERT_LE(a.map.prob[i], 1.0);
  }
}

TEST(Detect, ErrorsNameTheStage) {
  const NetworkSpec spec = small_net();
  DetectionConfig cfg;
  cfg.inference = small_inference();
  cfg.inference.sampling.rings.front().blockSize = 2;
  const AnnotatedImage img = small_synth(96, 1);
  try {
    detect(img.rgb, zero_state(spec), spec, cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("inference: ", 0), 0u) << e.what();
  }
  DetectionConfig badPrefilter;
  badPrefilter.prefilter.smoothing = 2;
  try {
    detect(img.rgb, zero_state(spec), spec, badPrefilter);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("prefilter: ", 0), 0u) << e.what();
  }
}

TEST(MapFile, RoundTripAtFloatPrecision) {
  const auto dir = madnet::testing::scratch_dir("mapfile");
  const ProbabilityMap m = map_from({{0.0, 0.25, 0.1}, {1.0, 0.0, 1.0 / 3.0}});
  write_probability_map(dir / "p.map", m);
  const ProbabilityMap back = read_probability_map(dir / "p.map");
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.skipped, m.skipped);
  for (std::size_t i = 0; i < m.prob.size(); ++i) EXPECT_EQ(back.prob[i], static_cast<double>(static_cast<float>(m.prob[i])));

  std::ifstream in(dir / "p.map", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), 6u + 8u + 6u * 4u);
  EXPECT_EQ(std::string(bytes.data(), 6), std::string("MAPF1\0", 6));
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 2);

  std::ofstream(dir / "bad.map", std::ios::binary) << "MAPF2";
  EXPECT_THROW(read_probability_map(dir / "bad.map"), DataError);
  std::ofstream(dir / "short.map", std::ios::binary).write(bytes.data(), 20);
  EXPECT_THROW(read_probability_map(dir / "short.map"), DataError);
}

TEST(RegionsFile, Format) {
  Region a = region_of({{2, 3}, {3, 3}, {2, 4}, {3, 4}});
  a.meanProb = 0.8125;
  Region b = region_of({{10, 1}});
  b.meanProb = 0.5;
  EXPECT_EQ(format_regions("img.ppm", {a, b}), "# image: img.ppm\n3,4,4,1.0000,0.812500\n10,1,1,1.0000,0.500000\n");
  EXPECT_EQ(format_regions("x", {}), "# image: x\n");
}
