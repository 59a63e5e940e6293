#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "madnet/config.hpp"
#include "madnet/error.hpp"
#include "test_support.hpp"

using namespace madnet;

namespace {

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsValidate) {
  const RunConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  EXPECT_EQ(network_spec(cfg).input_side(), 33);
  EXPECT_EQ(cfg.optimizer.epsilon0, 0.01);
  EXPECT_EQ(cfg.optimizer.batchSize, 128);
  EXPECT_EQ(cfg.postprocess.maxArea, 21);
  EXPECT_EQ(cfg.postprocess.minConvexity, 0.8);
  EXPECT_EQ(cfg.maRatio, 16.0);
}

TEST(Config, ParsesFileWithComments) {
  RunConfig cfg;
  apply_config_text(cfg,
                    "# experiment\n"
                    "seed = 42\n"
                    "\n"
                    "optimizer.epsilon0=0.1   # faster\n"
                    "optimizer.momentum_ramp = paper\n"
                    "network.preset = table1\n"
                    "network.conv_dropout = 0.1, 0.2, 0.3\n"
                    "sampling.rings = 0:10:1, 10:70:3\n"
                    "detection.transform = raw\n"
                    "dataset.rotate = true\n"
                    "evaluation.froc_thresholds = 0.5,0.9\n");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.optimizer.epsilon0, 0.1);
  EXPECT_EQ(cfg.optimizer.ramp, MomentumRamp::paper);
  EXPECT_EQ(cfg.preset, NetworkPreset::table1);
  EXPECT_EQ(cfg.drops.conv, (std::vector<double>{0.1, 0.2, 0.3}));
  ASSERT_TRUE(cfg.rings.has_value());
  EXPECT_EQ(cfg.rings->rings, (std::vector<SamplingRing>{{0, 10, 1}, {10, 70, 3}}));
  EXPECT_EQ(cfg.transform, WindowTransform::raw);
  EXPECT_TRUE(cfg.rotate);
  EXPECT_EQ(cfg.frocThresholds, (std::vector<double>{0.5, 0.9}));
  EXPECT_NO_THROW(validate(cfg));
  EXPECT_EQ(network_spec(cfg).input_side(), 129);
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  RunConfig cfg;
  const std::string msg = message_of([&] { apply_config_text(cfg, "seed = 1\noptimiser.epsilon0 = 0.1\n", "run.conf"); });
  EXPECT_NE(msg.find("run.conf:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("optimiser.epsilon0"), std::string::npos) << msg;
}

TEST(Config, RejectsBadValues) {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"seed", "-1"},
      {"seed", "abc"},
      {"optimizer.epsilon0", "0"},
      {"optimizer.decay_f", "1.5"},
      {"optimizer.m_i", "1"},
      {"optimizer.T", "0"},
      {"optimizer.batch_size", "2.5"},
      {"optimizer.momentum_ramp", "sideways"},
      {"network.preset", "huge"},
      {"network.input_dropout", "1"},
      {"network.conv_dropout", "0.1,0.2"},
      {"network.center_input", "maybe"},
      {"detection.neighborhood", "30"},
      {"detection.transform", "blur"},
      {"detection.prob_threshold", "1"},
      {"dataset.ma_fraction", "0"},
      {"sampling.rings", "0:10"},
      {"evaluation.froc_thresholds", "0.5,1.5"},
      {"foveation.sigma_slope", "nan"},
  };
  for (const auto& [key, value] : bad) {
    RunConfig cfg;
    EXPECT_THROW(set_config_value(cfg, key, value), ConfigError) << key << " = " << value;
  }
}

TEST(Config, MissingEqualsSign) {
  RunConfig cfg;
  EXPECT_THROW(apply_config_text(cfg, "seed 5\n"), ConfigError);
}

TEST(Config, CrossFieldValidation) {
  RunConfig cfg;
  cfg.optimizer.momentumInitial = 0.95;
  cfg.optimizer.momentumFinal = 0.9;
  EXPECT_THROW(validate(cfg), ConfigError);
  RunConfig rings;
  set_config_value(rings, "sampling.rings", "0:5:1,5:10:2");
  EXPECT_THROW(validate(rings), ConfigError);
}

TEST(Config, DumpRoundTrips) {
  RunConfig cfg;
  apply_config_text(cfg, "seed = 9\nfoveation.r0 = 3.5\nsampling.rings = 0:4:1,4:17:2\nnetwork.fc_dropout = 0.25\n"
                         "detection.kappa = 0.75\nout = results/run1\n");
  const std::string dumped = dump_config(cfg);
  RunConfig back;
  apply_config_text(back, dumped);
  EXPECT_EQ(dump_config(back), dumped);
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.fovealRadius, 3.5);
  EXPECT_EQ(back.out, "results/run1");
  EXPECT_NE(dumped.find("foveation.r0 = 3.5\n"), std::string::npos);
}

TEST(Config, DumpListsEveryKeyOnce) {
  const std::string dumped = "\n" + dump_config(RunConfig{});
  const auto keys = config_keys();
  EXPECT_GE(keys.size(), 40u);
  for (const std::string& k : keys) {
    const std::string needle = "\n" + k + " = ";
    ASSERT_EQ(dumped.find(needle), dumped.rfind(needle)) << k;
    ASSERT_NE(dumped.find(needle), std::string::npos) << k;
  }
  for (const char* k : {"optimizer.epsilon0", "optimizer.decay_f", "optimizer.m_i", "optimizer.m_f", "optimizer.T",
                        "optimizer.max_norm_c", "optimizer.batch_size", "optimizer.momentum_ramp", "foveation.r0",
                        "foveation.sigma_slope", "sampling.rings"}) {
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
  }
}

TEST(Config, LoadFromFile) {
  const auto dir = madnet::testing::scratch_dir("config");
  std::ofstream(dir / "a.conf") << "train.batches = 7\n";
  EXPECT_EQ(load_config(dir / "a.conf").train.batches, 7);
  EXPECT_THROW(load_config(dir / "missing.conf"), ConfigError);
}

TEST(Config, DerivedSettingsFollowWindowSide) {
  RunConfig cfg;
  EXPECT_EQ(foveation_config(cfg, 33).fovealRadius, default_foveation(33).fovealRadius);
  EXPECT_EQ(sampling_grid(cfg, 129).rings, default_sampling_grid(129).rings);
  cfg.fovealRadius = 2.0;
  EXPECT_EQ(foveation_config(cfg, 33).fovealRadius, 2.0);
  const SamplerConfig s = sampler_config(cfg, 33);
  EXPECT_EQ(s.windowSide, 33);
  EXPECT_EQ(s.batchSize, 128);
  const CatalogConfig c = catalog_config(cfg);
  EXPECT_EQ(c.nonMaPerMa, 16.0);
  EXPECT_EQ(c.hardNegativeFraction, 0.8);
  EXPECT_FALSE(network_spec(cfg).layers.empty());
}
