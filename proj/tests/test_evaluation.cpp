#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "madnet/error.hpp"
#include "madnet/evaluation.hpp"
#include "test_support.hpp"

using namespace madnet;

namespace {

// Pairwise comparison: P(score_pos > score_neg) + 0.5 P(tie).
double mann_whitney(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!l[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

Region region_at(std::vector<Point> pixels, double meanProb = 0.5) {
  Region r = make_region(std::move(pixels));
  r.meanProb = meanProb;
  return r;
}

}  // namespace

TEST(Confusion, IdentityAndComplement) {
  SeededRng rng(1);
  BinaryRaster truth(8, 8);
  for (auto& v : truth.data) v = rng.bernoulli(0.3);
  const ConfusionCounts same = confusion(truth, truth);
  EXPECT_EQ(same.fp, 0);
  EXPECT_EQ(same.fn, 0);
  BinaryRaster inverse = truth;
  for (auto& v : inverse.data) v = !v;
  const ConfusionCounts flipped = confusion(inverse, truth);
  EXPECT_EQ(flipped.tp, 0);
  EXPECT_EQ(flipped.tn, 0);
}

TEST(Confusion, MatchesPerPixelTally) {
  SeededRng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    BinaryRaster pred(8, 8), truth(8, 8), mask(8, 8);
    for (std::size_t i = 0; i < 64; ++i) {
      pred.data[i] = rng.bernoulli(0.4);
      truth.data[i] = rng.bernoulli(0.3);
      mask.data[i] = rng.bernoulli(0.8);
    }
    ConfusionCounts expected;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        if (!mask.at(x, y)) continue;
        const bool p = pred.at(x, y), t = truth.at(x, y);
        expected.tp += p && t;
        expected.fp += p && !t;
        expected.fn += !p && t;
        expected.tn += !p && !t;
      }
    }
    EXPECT_EQ(confusion(pred, truth, mask), expected);
  }
}

TEST(Confusion, MisalignedRasters) {
  EXPECT_THROW(confusion(BinaryRaster(4, 4), BinaryRaster(4, 5)), DataError);
  EXPECT_THROW(confusion(BinaryRaster(4, 4), BinaryRaster(4, 4), BinaryRaster(3, 4)), DataError);
}

TEST(Metrics, HandArithmetic) {
  const MetricsReport m = metrics({97, 5, 95, 3});
  EXPECT_DOUBLE_EQ(*m.sensitivity, 0.97);
  EXPECT_DOUBLE_EQ(*m.specificity, 0.95);
  EXPECT_DOUBLE_EQ(*m.accuracy, 0.96);
  EXPECT_DOUBLE_EQ(*m.predictivity, 97.0 / 102.0);
  EXPECT_EQ(format_metric(m.sensitivity), "0.9700");
}

TEST(Metrics, Perfect) {
  const MetricsReport m = metrics({10, 0, 20, 0});
  EXPECT_EQ(*m.sensitivity, 1.0);
  EXPECT_EQ(*m.specificity, 1.0);
  EXPECT_EQ(*m.predictivity, 1.0);
  EXPECT_EQ(*m.accuracy, 1.0);
}

TEST(Metrics, UndefinedNotZero) {
  const MetricsReport m = metrics({0, 4, 6, 0});
  EXPECT_FALSE(m.sensitivity.has_value());
  EXPECT_EQ(*m.predictivity, 0.0);
  EXPECT_EQ(format_metric(m.sensitivity), "undefined");
  EXPECT_FALSE(metrics({0, 0, 6, 2}).predictivity.has_value());
  EXPECT_DOUBLE_EQ(*m.specificity, 0.6);
  EXPECT_FALSE(metrics({}).accuracy.has_value());
}

TEST(Metrics, AccuracyIsClassWeightedMean) {
  SeededRng rng(3);
  for (int i = 0; i < 200; ++i) {
    const ConfusionCounts c{static_cast<long>(rng.index(50)) + 1, static_cast<long>(rng.index(50)),
                            static_cast<long>(rng.index(50)) + 1, static_cast<long>(rng.index(50))};
    const MetricsReport m = metrics(c);
    const double pos = c.tp + c.fn;
    const double neg = c.tn + c.fp;
    EXPECT_NEAR(*m.accuracy, (*m.sensitivity * pos + *m.specificity * neg) / (pos + neg), 1e-12);
    for (const auto& v : {m.sensitivity, m.specificity, m.predictivity, m.accuracy}) {
      if (v) {
        EXPECT_GE(*v, 0.0);
        EXPECT_LE(*v, 1.0);
      }
    }
  }
}

TEST(Roc, SeparableCases) {
  EXPECT_EQ(roc_curve({0.9, 0.8, 0.4, 0.1}, {1, 1, 0, 0}).auc, 1.0);
  EXPECT_EQ(roc_curve({1.0, 0.0, 1.0, 0.0}, {1, 0, 1, 0}).auc, 1.0);
  EXPECT_EQ(roc_curve({0.1, 0.2}, {1, 0}).auc, 0.0);
}

TEST(Roc, EndpointsAndOrdering) {
  const RocCurve c = roc_curve({0.3, 0.7, 0.7, 0.2, 0.9}, {0, 1, 0, 0, 1});
  ASSERT_GE(c.points.size(), 2u);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.front().tpr, 0.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_LT(c.points[i].threshold, c.points[i - 1].threshold);
    EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
    EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
  }
}

TEST(Roc, EqualsMannWhitneyWithTies) {
  SeededRng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + rng.index(950);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = rng.bernoulli(0.3);
      // Coarse scores force many ties.
      s[i] = std::round((rng.uniform() + 0.3 * l[i]) * 20.0) / 20.0;
    }
    l[0] = 1;
    l[1] = 0;
    EXPECT_NEAR(roc_curve(s, l).auc, mann_whitney(s, l), 1e-9);
  }
}

TEST(Roc, InvariantUnderMonotoneTransform) {
  SeededRng rng(5);
  std::vector<double> s(400);
  std::vector<int> l(400);
  for (std::size_t i = 0; i < s.size(); ++i) {
    l[i] = rng.bernoulli(0.5);
    s[i] = rng.uniform() + 0.5 * l[i];
  }
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
  EXPECT_NEAR(roc_curve(s, l).auc, roc_curve(t, l).auc, 1e-12);
}

TEST(Roc, IndependentScoresNearHalf) {
  SeededRng rng(6);
  std::vector<double> s(20000);
  std::vector<int> l(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    l[i] = rng.bernoulli(0.2);
  }
  EXPECT_NEAR(roc_curve(s, l).auc, 0.5, 0.02);
}

TEST(Roc, SingleClassIsAnError) {
  EXPECT_THROW(roc_curve({0.1, 0.2}, {1, 1}), DataError);
  EXPECT_THROW(roc_curve({0.1, 0.2}, {0, 0}), DataError);
  EXPECT_THROW(roc_curve({0.1}, {0, 1}), DataError);
}

TEST(Roc, ThresholdGridClosesCurve) {
  const std::vector<double> s{0.95, 0.6, 0.55, 0.3, 0.1};
  const std::vector<int> l{1, 1, 0, 0, 0};
  const RocCurve c = roc_curve(s, l, {0.9, 0.5});
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_EQ(c.points[1].tpr, 0.5);
  EXPECT_EQ(c.points[1].fpr, 0.0);
  EXPECT_EQ(c.points[2].tpr, 1.0);
  EXPECT_NEAR(c.points[2].fpr, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(c.points[3].fpr, 1.0);
  // Coarse grid: trapezoids (0, 0.5) -> (1/3, 1) -> (1, 1).
  EXPECT_NEAR(c.auc, 11.0 / 12.0, 1e-15);
  const RocCurve full = roc_curve(s, l, s);
  EXPECT_NEAR(full.auc, roc_curve(s, l).auc, 1e-15);
}

TEST(Roc, MapsUseInMaskPixelsAndZeroForSkipped) {
  ProbabilityMap m(3, 1);
  m.prob = {0.9, 0.8, 0.7};
  m.skipped = {0, 1, 0};
  BinaryRaster lab(3, 1);
  lab.data = {1, 1, 0};
  BinaryRaster mask(3, 1, 1);
  // Skipped positive scores 0 and falls below the negative.
  EXPECT_NEAR(roc_curve({&m}, {&lab}, {&mask}).auc, 0.5, 1e-15);
  mask.data[1] = 0;
  EXPECT_EQ(roc_curve({&m}, {&lab}, {&mask}).auc, 1.0);
}

TEST(Froc, AllHitNoExtras) {
  BinaryRaster lab(10, 10);
  lab.at(2, 2) = lab.at(2, 3) = 1;
  lab.at(7, 7) = 1;
  const std::vector<std::vector<std::vector<Region>>> det{{{region_at({{2, 3}}), region_at({{7, 7}, {8, 7}})}}};
  const auto curve = froc({0.5}, det, {&lab});
  ASSERT_EQ(curve.size(), 1u);
  EXPECT_EQ(curve[0].sensitivity, 1.0);
  EXPECT_EQ(curve[0].averageFalsePositives, 0.0);
}

TEST(Froc, NoDetections) {
  BinaryRaster lab(5, 5);
  lab.at(1, 1) = 1;
  const auto curve = froc({0.5}, {{{}}}, {&lab});
  EXPECT_EQ(curve[0].sensitivity, 0.0);
  EXPECT_EQ(curve[0].averageFalsePositives, 0.0);
}

TEST(Froc, AverageFalsePositivesPerImage) {
  BinaryRaster a(6, 6), b(6, 6);
  a.at(0, 0) = 1;
  const std::vector<std::vector<std::vector<Region>>> det{
      {{region_at({{0, 0}}), region_at({{4, 4}})}, {region_at({{1, 1}}), region_at({{3, 3}})}}};
  const auto curve = froc({0.5}, det, {&a, &b});
  EXPECT_EQ(curve[0].averageFalsePositives, 1.5);
  EXPECT_EQ(curve[0].sensitivity, 1.0);
}

TEST(Froc, OneHitPerComponent) {
  BinaryRaster lab(6, 6);
  lab.at(2, 2) = lab.at(3, 2) = 1;
  lab.at(5, 5) = 1;
  const std::vector<std::vector<std::vector<Region>>> det{{{region_at({{2, 2}}), region_at({{3, 2}})}}};
  const auto curve = froc({0.5}, det, {&lab});
  EXPECT_EQ(curve[0].sensitivity, 0.5);
  EXPECT_EQ(curve[0].averageFalsePositives, 0.0);
}

TEST(Froc, NestedDetectionsAreMonotone) {
  SeededRng rng(7);
  BinaryRaster lab(40, 40);
  std::vector<Point> spots;
  for (int k = 0; k < 30; ++k) {
    const Point p{static_cast<int>(rng.index(40)), static_cast<int>(rng.index(40))};
    spots.push_back(p);
    if (k % 2 == 0) lab.at(p.x, p.y) = 1;
  }
  std::vector<double> scores(spots.size());
  for (double& s : scores) s = rng.uniform();
  std::vector<double> thresholds;
  std::vector<std::vector<std::vector<Region>>> det;
  for (double t = 0.95; t > 0.0; t -= 0.1) {
    thresholds.push_back(t);
    std::vector<Region> regions;
    for (std::size_t k = 0; k < spots.size(); ++k) {
      if (scores[k] >= t) regions.push_back(region_at({spots[k]}));
    }
    det.push_back({regions});
  }
  const auto curve = froc(thresholds, det, {&lab});
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].sensitivity, curve[i - 1].sensitivity);
    EXPECT_GE(curve[i].averageFalsePositives, curve[i - 1].averageFalsePositives);
  }
  EXPECT_EQ(sensitivity_at(curve, 1e9), curve.back().sensitivity);
  EXPECT_EQ(sensitivity_at(curve, -1.0), 0.0);
}

TEST(Froc, Errors) {
  BinaryRaster lab(3, 3);
  EXPECT_THROW(froc({0.5, 0.6}, {{{}}}, {&lab}), DataError);
  EXPECT_THROW(froc({0.5}, {{}}, {}), DataError);
  EXPECT_THROW(froc({0.5}, {{{}, {}}}, {&lab}), DataError);
}

TEST(Decision, DefaultAndCustomRule) {
  EXPECT_FALSE(image_decision({}));
  EXPECT_TRUE(image_decision({region_at({{1, 1}})}));
  const std::vector<Region> two{region_at({{1, 1}}, 0.6), region_at({{5, 5}}, 0.9)};
  EXPECT_FALSE(image_decision(two, {3}));
  EXPECT_TRUE(image_decision(two, {2}));
  EXPECT_EQ(image_score(two), 0.9);
  EXPECT_EQ(image_score({}), 0.0);
}

TEST(Csv, Headers) {
  const auto dir = madnet::testing::scratch_dir("eval_csv");
  write_roc_csv(dir / "roc.csv", roc_curve({0.9, 0.1}, {1, 0}));
  write_froc_csv(dir / "froc.csv", {{0.5, 0.75, 1.5}});
  std::ifstream roc(dir / "roc.csv");
  std::string line;
  std::getline(roc, line);
  EXPECT_EQ(line, "threshold,one_minus_sp,se");
  std::ifstream fr(dir / "froc.csv");
  std::getline(fr, line);
  EXPECT_EQ(line, "threshold,avg_fp_per_image,se");
  std::getline(fr, line);
  EXPECT_EQ(line, "0.500000,1.500000,0.750000");
}
