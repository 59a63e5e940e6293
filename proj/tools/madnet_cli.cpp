#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "madnet/commands.hpp"
#include "madnet/config.hpp"
#include "madnet/error.hpp"

namespace {

using madnet::RunConfig;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  bool dumpConfig = false;
  std::string manifest;
  std::string image;
  std::string checkpoint;
};

RunConfig effective_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : madnet::load_config(o.config);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw madnet::ConfigError("--set expects key=value, got '" + s + "'");
    madnet::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 0) throw madnet::ConfigError("--threads must be >= 0");
    cfg.threads = *o.threads;
  }
  if (o.out) cfg.out = *o.out;
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  madnet::validate(cfg);
  return cfg;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "flat key = value config file");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--threads", o.threads, "worker threads (0 = all)");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--set", o.sets, "override one config key, key=value")->take_all();
  app->add_flag("--dump-config", o.dumpConfig, "print the effective config and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"madnet: microaneurysm detection with a maxout/dropout convolutional network"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated corpus");
  auto* train = app.add_subcommand("train", "train a network on a manifest");
  auto* predict = app.add_subcommand("predict", "probability map and regions for one image");
  auto* evaluate = app.add_subcommand("evaluate", "metrics, ROC and FROC over a labeled manifest");
  auto* roc = app.add_subcommand("roc", "pixel-level ROC over a labeled manifest");
  for (auto* sub : {synth, train, predict, evaluate, roc}) add_common(sub, o);
  for (auto* sub : {train, evaluate, roc}) sub->add_option("--manifest", o.manifest, "manifest file");
  predict->add_option("--image", o.image, "input image (PPM or PNG)")->required();
  for (auto* sub : {predict, evaluate, roc}) sub->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = effective_config(o);
    if (o.dumpConfig) {
      std::cout << madnet::dump_config(cfg);
      return 0;
    }
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    if (synth->parsed()) madnet::run_synth(cfg, std::cout);
    else if (train->parsed()) madnet::run_train(cfg, std::cout);
    else if (predict->parsed()) madnet::run_predict(cfg, o.image, o.checkpoint, std::cout);
    else if (evaluate->parsed()) madnet::run_evaluate(cfg, o.checkpoint, std::cout);
    else if (roc->parsed()) madnet::run_roc(cfg, o.checkpoint, std::cout);
    return 0;
  } catch (const madnet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const madnet::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const madnet::ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const madnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const madnet::GeometryError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
