#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "madnet/evaluation.hpp"
#include "madnet/network.hpp"
#include "madnet/optimizer.hpp"
#include "madnet/windowing.hpp"

namespace madnet {

struct BatchGradients {
  double loss = 0.0;
  NetworkGradients gradients;
};

/// Mean loss and gradient over a batch. Windows are split into chunks of
/// `chunk` that run in parallel; partial sums are reduced in chunk order, so
/// the result does not depend on the thread count. Window i of batch t draws
/// its dropout masks from seed + t * batch size + i.
BatchGradients batch_gradients(const NetworkState& state, const NetworkSpec& spec, const std::vector<Window>& batch,
                               std::uint64_t seed, long t, int chunk = 4);

struct TrainConfig {
  long batches = 2000;
  long evalInterval = 100;
  int chunk = 4;
  std::uint64_t seed = 1;
};

struct TrainLogEntry {
  long batch = 0;
  long t = 0;
  double loss = 0.0;
  double learningRate = 0.0;
  double momentum = 0.0;
};

struct ValidationEntry {
  long batch = 0;
  MetricsReport report;
};

struct TrainResult {
  NetworkState state;
  OptimizerState optimizer;
  std::vector<TrainLogEntry> log;
  std::vector<ValidationEntry> validation;
  /// Set when training stopped on a non-finite loss or parameter; `state` is
  /// then the last finite state.
  std::optional<std::string> failure;
};

using BatchSource = std::function<std::vector<Window>()>;
using StopPredicate = std::function<bool(const TrainResult&)>;

/// Runs up to cfg.batches optimizer steps. Validation windows, when given,
/// are scored every evalInterval batches and after the last one. `stop`
/// is consulted after each batch.
TrainResult train(const NetworkSpec& spec, NetworkState initial, const BatchSource& source, const OptimizerConfig& opt,
                  const TrainConfig& cfg, const std::vector<Window>& validation = {}, const StopPredicate& stop = {});

/// Window-level counts with MA predicted when p(MA) > 0.5.
ConfusionCounts classify_windows(const NetworkState& state, const NetworkSpec& spec, const std::vector<Window>& windows);

std::string format_log_line(const TrainLogEntry& e);

}  // namespace madnet
