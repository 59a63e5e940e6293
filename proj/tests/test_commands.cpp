#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "madnet/commands.hpp"
#include "madnet/error.hpp"
#include "test_support.hpp"

using namespace madnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config(const fs::path& out) {
  RunConfig cfg;
  cfg.out = out;
  cfg.seed = 7;
  cfg.synthCount = 3;
  cfg.synth.imageSize = 96;
  cfg.synth.maCount = 3;
  cfg.synth.vesselCount = 3;
  cfg.synth.hemorrhageCount = 1;
  cfg.convMaps = 4;
  cfg.fcUnits = 8;
  cfg.optimizer.batchSize = 16;
  cfg.train.batches = 6;
  cfg.train.evalInterval = 3;
  cfg.validationWindows = 16;
  cfg.maRatio = 4.0;
  return cfg;
}

// Synthesizes into dir/data and returns a config whose manifest points there.
RunConfig with_corpus(const fs::path& dir) {
  RunConfig cfg = small_config(dir / "data");
  std::ostringstream log;
  cfg.manifest = run_synth(cfg, log);
  cfg.out = dir / "run";
  return cfg;
}

}  // namespace

TEST(Synth, WritesManifestWithOneLinePerImage) {
  const fs::path dir = madnet::testing::scratch_dir("synth_lines");
  RunConfig cfg = small_config(dir);
  std::ostringstream log;
  const fs::path manifest = run_synth(cfg, log);
  const auto entries = read_manifest(manifest);
  ASSERT_EQ(entries.size(), 3u);
  for (const auto& e : entries) {
    EXPECT_TRUE(fs::exists(e.image));
    ASSERT_TRUE(e.label && e.mask);
    EXPECT_TRUE(fs::exists(*e.label));
    EXPECT_TRUE(fs::exists(*e.mask));
    EXPECT_TRUE(fs::exists(e.image.string() + ".hints"));
  }
}

TEST(Synth, ZeroCountGivesEmptyManifest) {
  const fs::path dir = madnet::testing::scratch_dir("synth_zero");
  RunConfig cfg = small_config(dir);
  cfg.synthCount = 0;
  std::ostringstream log;
  EXPECT_TRUE(read_manifest(run_synth(cfg, log)).empty());
}

TEST(Synth, SameSeedIsByteIdentical) {
  const fs::path a = madnet::testing::scratch_dir("synth_a");
  const fs::path b = madnet::testing::scratch_dir("synth_b");
  std::ostringstream log;
  run_synth(small_config(a), log);
  run_synth(small_config(b), log);
  for (const char* name : {"img_000.ppm", "img_002.ppm", "label_001.pgm", "mask_002.pgm", "img_001.ppm.hints"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  RunConfig other = small_config(madnet::testing::scratch_dir("synth_c"));
  other.seed = 8;
  run_synth(other, log);
  EXPECT_NE(slurp(a / "img_000.ppm"), slurp(other.out / "img_000.ppm"));
}

TEST(LoadCorpus, ReadsHintsSidecar) {
  const fs::path dir = madnet::testing::scratch_dir("corpus_hints");
  RunConfig cfg = small_config(dir);
  std::ostringstream log;
  const auto entries = read_manifest(run_synth(cfg, log));
  const auto images = load_corpus(entries, cfg.mask, true);
  ASSERT_EQ(images.size(), entries.size());
  bool anyHints = false;
  for (const auto& img : images) anyHints |= !img.hardNegativeHints.empty();
  EXPECT_TRUE(anyHints);
}

TEST(LoadCorpus, UnlabeledEntriesListedInError) {
  const fs::path dir = madnet::testing::scratch_dir("corpus_unlabeled");
  RunConfig cfg = small_config(dir);
  std::ostringstream log;
  auto entries = read_manifest(run_synth(cfg, log));
  entries[0].label.reset();
  entries[2].label.reset();
  try {
    load_corpus(entries, cfg.mask, true);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("img_000.ppm"), std::string::npos) << msg;
    EXPECT_NE(msg.find("img_002.ppm"), std::string::npos) << msg;
  }
  const auto images = load_corpus(entries, cfg.mask, false);
  EXPECT_EQ(std::count(images[0].labels.data.begin(), images[0].labels.data.end(), 1), 0);
}

TEST(LoadCorpus, MalformedHintsNameLine) {
  const fs::path dir = madnet::testing::scratch_dir("corpus_badhints");
  RunConfig cfg = small_config(dir);
  cfg.synthCount = 1;
  std::ostringstream log;
  const auto entries = read_manifest(run_synth(cfg, log));
  std::ofstream(entries[0].image.string() + ".hints", std::ios::trunc) << "3,4\nseven\n";
  try {
    load_corpus(entries, cfg.mask, true);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Train, EmptyManifestIsDataError) {
  const fs::path dir = madnet::testing::scratch_dir("train_empty");
  RunConfig cfg = small_config(dir / "data");
  cfg.synthCount = 0;
  std::ostringstream log;
  cfg.manifest = run_synth(cfg, log);
  cfg.out = dir / "run";
  EXPECT_THROW(run_train(cfg, log), DataError);
}

TEST(Train, MissingManifestIsConfigError) {
  RunConfig cfg = small_config(madnet::testing::scratch_dir("train_nomanifest"));
  std::ostringstream log;
  EXPECT_THROW(run_train(cfg, log), ConfigError);
}

TEST(Train, WritesLogAndIsDeterministic) {
  const fs::path dir = madnet::testing::scratch_dir("train_det");
  RunConfig cfg = with_corpus(dir);
  std::ostringstream log;
  cfg.out = dir / "run1";
  const fs::path ck1 = run_train(cfg, log);
  cfg.out = dir / "run2";
  const fs::path ck2 = run_train(cfg, log);
  EXPECT_EQ(slurp(ck1), slurp(ck2));
  EXPECT_EQ(slurp(dir / "run1" / "train_log.csv"), slurp(dir / "run2" / "train_log.csv"));

  std::ifstream in(dir / "run1" / "train_log.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "batch,t,loss,lr,momentum");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, cfg.train.batches);

  std::ifstream val(dir / "run1" / "validation.csv");
  std::getline(val, header);
  EXPECT_EQ(header, "batch,se,sp");
}

TEST(Train, SeedChangesCheckpoint) {
  const fs::path dir = madnet::testing::scratch_dir("train_seed");
  RunConfig cfg = with_corpus(dir);
  std::ostringstream log;
  cfg.out = dir / "a";
  const fs::path a = run_train(cfg, log);
  cfg.out = dir / "b";
  cfg.seed = 99;
  const fs::path b = run_train(cfg, log);
  EXPECT_NE(slurp(a), slurp(b));
}

class TrainedModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(madnet::testing::scratch_dir("trained_model"));
    cfg_ = new RunConfig(with_corpus(*dir_));
    std::ostringstream log;
    cfg_->out = *dir_ / "model";
    checkpoint_ = new fs::path(run_train(*cfg_, log));
  }
  static void TearDownTestSuite() {
    delete dir_;
    delete cfg_;
    delete checkpoint_;
  }

  static fs::path* dir_;
  static RunConfig* cfg_;
  static fs::path* checkpoint_;
};

fs::path* TrainedModel::dir_ = nullptr;
RunConfig* TrainedModel::cfg_ = nullptr;
fs::path* TrainedModel::checkpoint_ = nullptr;

TEST_F(TrainedModel, PredictWritesOutputsOfImageSize) {
  RunConfig cfg = *cfg_;
  cfg.out = *dir_ / "predict1";
  const auto entries = read_manifest(cfg.manifest);
  std::ostringstream log;
  const DetectionResult r = run_predict(cfg, entries[0].image, *checkpoint_, log);
  EXPECT_EQ(r.map.width, 96);
  EXPECT_EQ(r.map.height, 96);
  const ProbabilityMap back = read_probability_map(cfg.out / "img_000.map");
  EXPECT_EQ(back.width, 96);
  EXPECT_EQ(back.height, 96);
  EXPECT_TRUE(fs::exists(cfg.out / "img_000_prob.pgm"));
  EXPECT_TRUE(fs::exists(cfg.out / "img_000_regions.txt"));
}

TEST_F(TrainedModel, PredictIsByteIdenticalAcrossRuns) {
  const auto entries = read_manifest(cfg_->manifest);
  std::ostringstream log;
  RunConfig a = *cfg_;
  a.out = *dir_ / "pa";
  RunConfig b = *cfg_;
  b.out = *dir_ / "pb";
  run_predict(a, entries[1].image, *checkpoint_, log);
  run_predict(b, entries[1].image, *checkpoint_, log);
  for (const char* name : {"img_001.map", "img_001_prob.pgm", "img_001_regions.txt"}) {
    EXPECT_EQ(slurp(a.out / name), slurp(b.out / name)) << name;
  }
}

TEST_F(TrainedModel, BlankImageGivesNoRegions) {
  const fs::path image = *dir_ / "blank.ppm";
  {
    std::ofstream out(image, std::ios::binary);
    out << "P6\n80 80\n255\n" << std::string(80 * 80 * 3, '\0');
  }
  RunConfig cfg = *cfg_;
  cfg.out = *dir_ / "blank_out";
  std::ostringstream log;
  const DetectionResult r = run_predict(cfg, image, *checkpoint_, log);
  EXPECT_TRUE(r.regions.empty());
  std::ifstream in(cfg.out / "blank_regions.txt");
  int dataLines = 0;
  for (std::string line; std::getline(in, line);) dataLines += !line.empty() && line[0] != '#';
  EXPECT_EQ(dataLines, 0);
}

TEST_F(TrainedModel, MissingCheckpointIsDataError) {
  const auto entries = read_manifest(cfg_->manifest);
  std::ostringstream log;
  EXPECT_THROW(run_predict(*cfg_, entries[0].image, *dir_ / "nope.ckpt", log), DataError);
}

TEST_F(TrainedModel, EvaluateWritesReportFiles) {
  RunConfig cfg = *cfg_;
  cfg.out = *dir_ / "eval";
  std::ostringstream log;
  const EvaluationReport report = run_evaluate(cfg, *checkpoint_, log);
  EXPECT_EQ(report.images.size(), 3u);
  for (const char* name : {"metrics.txt", "roc.csv", "froc.csv", "per_image.csv"}) {
    EXPECT_TRUE(fs::exists(cfg.out / name)) << name;
  }
  EXPECT_NE(log.str().find("pixel-level AUC"), std::string::npos);
  EXPECT_NE(log.str().find("image-level AUC"), std::string::npos);
  EXPECT_GE(report.pixelRoc.auc, 0.0);
  EXPECT_LE(report.pixelRoc.auc, 1.0);

  cfg.out = *dir_ / "roc";
  const double auc = run_roc(cfg, *checkpoint_, log);
  EXPECT_NEAR(auc, report.pixelRoc.auc, 1e-12);
  EXPECT_TRUE(fs::exists(cfg.out / "roc.csv"));
}

namespace {

ProbabilityMap oracle_map(const AnnotatedImage& img) {
  ProbabilityMap m(img.labels.width, img.labels.height);
  for (std::size_t i = 0; i < m.prob.size(); ++i) {
    m.skipped[i] = img.fovMask.data[i] ? 0 : 1;
    m.prob[i] = img.fovMask.data[i] && img.labels.data[i] ? 1.0 : 0.0;
  }
  return m;
}

std::vector<AnnotatedImage> small_corpus(const std::string& name, int count) {
  RunConfig cfg = small_config(madnet::testing::scratch_dir(name));
  cfg.synthCount = count;
  std::ostringstream log;
  return load_corpus(read_manifest(run_synth(cfg, log)), cfg.mask, true);
}

}  // namespace

TEST(EvaluateMaps, OracleMapsArePerfect) {
  const auto images = small_corpus("eval_oracle", 3);
  std::vector<ProbabilityMap> maps;
  for (const auto& img : images) maps.push_back(oracle_map(img));
  RunConfig cfg;
  const EvaluationReport r = evaluate_maps(images, maps, cfg);
  EXPECT_DOUBLE_EQ(r.pixelRoc.auc, 1.0);
  EXPECT_EQ(r.pooled.fp, 0);
  ASSERT_FALSE(r.froc.empty());
  for (const auto& p : r.froc) {
    EXPECT_DOUBLE_EQ(p.averageFalsePositives, 0.0);
  }
  for (const auto& im : r.images) {
    EXPECT_TRUE(im.truth);
    EXPECT_TRUE(im.decision);
  }
}

TEST(EvaluateMaps, PooledCountsAreSumOfImages) {
  const auto images = small_corpus("eval_pooled", 3);
  std::vector<ProbabilityMap> maps;
  SeededRng rng(5);
  for (const auto& img : images) {
    ProbabilityMap m = oracle_map(img);
    for (std::size_t i = 0; i < m.prob.size(); ++i) {
      if (!m.skipped[i]) m.prob[i] = rng.uniform() < 0.002 ? 0.9 : m.prob[i] * rng.uniform();
    }
    maps.push_back(std::move(m));
  }
  const EvaluationReport r = evaluate_maps(images, maps, RunConfig{});
  ConfusionCounts sum;
  for (const auto& im : r.images) sum += im.counts;
  EXPECT_EQ(sum.tp, r.pooled.tp);
  EXPECT_EQ(sum.fp, r.pooled.fp);
  EXPECT_EQ(sum.tn, r.pooled.tn);
  EXPECT_EQ(sum.fn, r.pooled.fn);
  long inMask = 0;
  for (const auto& img : images) inMask += std::count(img.fovMask.data.begin(), img.fovMask.data.end(), 1);
  EXPECT_EQ(r.pooled.tp + r.pooled.fp + r.pooled.tn + r.pooled.fn, inMask);
}

TEST(EvaluateMaps, RejectsEmptyAndMismatched) {
  EXPECT_THROW(evaluate_maps({}, {}, RunConfig{}), DataError);
  const auto images = small_corpus("eval_mismatch", 1);
  EXPECT_THROW(evaluate_maps(images, {}, RunConfig{}), DataError);
  std::vector<ProbabilityMap> wrong{ProbabilityMap(10, 10)};
  EXPECT_THROW(evaluate_maps(images, wrong, RunConfig{}), DataError);
}

TEST(EvaluateMaps, ReportSeparatesPixelAndImageAuc) {
  const auto images = small_corpus("eval_format", 2);
  std::vector<ProbabilityMap> maps;
  for (const auto& img : images) maps.push_back(oracle_map(img));
  RunConfig cfg;
  const EvaluationReport r = evaluate_maps(images, maps, cfg);
  const std::string text = format_report(r, cfg);
  EXPECT_NE(text.find("pixel-level AUC 1.0000"), std::string::npos) << text;
  EXPECT_NE(text.find("image-level AUC"), std::string::npos);
  EXPECT_NE(text.find("FROC SE at <= 2 FP/image"), std::string::npos);
}
