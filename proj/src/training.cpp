#include "madnet/training.hpp"

#include <cmath>
#include <cstdio>
#include <exception>

#include "madnet/error.hpp"

namespace madnet {

namespace {

void accumulate(NetworkState& into, const NetworkState& from) {
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    if (!into.layers[l].weights.empty()) into.layers[l].weights += from.layers[l].weights;
    if (!into.layers[l].bias.empty()) into.layers[l].bias += from.layers[l].bias;
  }
}

void scale(NetworkState& s, double factor) {
  for (auto& layer : s.layers) {
    if (!layer.weights.empty()) layer.weights *= factor;
    if (!layer.bias.empty()) layer.bias *= factor;
  }
}

}  // namespace

BatchGradients batch_gradients(const NetworkState& state, const NetworkSpec& spec, const std::vector<Window>& batch,
                               std::uint64_t seed, long t, int chunk) {
  if (batch.empty()) throw DataError("empty training batch");
  if (chunk < 1) throw ConfigError("gradient chunk must be positive");
  const int n = static_cast<int>(batch.size());
  const int chunks = (n + chunk - 1) / chunk;
  std::vector<NetworkGradients> partial(chunks);
  std::vector<double> partialLoss(chunks, 0.0);
  std::vector<std::exception_ptr> errors(chunks);
#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < chunks; ++c) {
    try {
      partial[c] = zero_state(spec);
      for (int i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
        const Window& w = batch[i];
        if (!w.label) throw DataError("training window without a label");
        SeededRng rng(seed + static_cast<std::uint64_t>(t) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(i));
        const ForwardResult fr = forward(state, spec, w.pixels, Mode::train, &rng);
        const LossAndGradients lg = loss_and_backward(state, spec, fr.trace, *w.label);
        partialLoss[c] += lg.loss;
        accumulate(partial[c], lg.gradients);
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  BatchGradients out{0.0, std::move(partial[0])};
  out.loss = partialLoss[0];
  for (int c = 1; c < chunks; ++c) {
    accumulate(out.gradients, partial[c]);
    out.loss += partialLoss[c];
  }
  scale(out.gradients, 1.0 / n);
  out.loss /= n;
  return out;
}

ConfusionCounts classify_windows(const NetworkState& state, const NetworkSpec& spec, const std::vector<Window>& windows) {
  const int n = static_cast<int>(windows.size());
  std::vector<std::uint8_t> predicted(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) {
    try {
      predicted[i] = predict_proba(state, spec, windows[i].pixels) > 0.5 ? 1 : 0;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ConfusionCounts c;
  for (int i = 0; i < n; ++i) {
    if (!windows[i].label) throw DataError("cannot score an unlabeled window");
    const bool truth = *windows[i].label == Label::MA;
    if (predicted[i] && truth) ++c.tp;
    else if (predicted[i]) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

TrainResult train(const NetworkSpec& spec, NetworkState initial, const BatchSource& source, const OptimizerConfig& opt,
                  const TrainConfig& cfg, const std::vector<Window>& validation, const StopPredicate& stop) {
  opt.validate();
  if (cfg.batches < 0) throw ConfigError("train.batches must be >= 0");
  if (cfg.evalInterval < 1) throw ConfigError("train.eval_interval must be positive");
  validate(spec);
  TrainResult result;
  result.optimizer = make_optimizer_state(initial);
  result.state = std::move(initial);
  for (long b = 1; b <= cfg.batches; ++b) {
    const std::vector<Window> batch = source();
    const long t = result.optimizer.iteration;
    const Schedule sched = schedule(opt, t);
    BatchGradients bg;
    try {
      bg = batch_gradients(result.state, spec, batch, cfg.seed, t, cfg.chunk);
    } catch (const NumericError& e) {
      result.failure = "batch " + std::to_string(b) + ": " + e.what();
      return result;
    }
    if (!std::isfinite(bg.loss) || !bg.gradients.all_finite()) {
      result.failure = "batch " + std::to_string(b) + ": non-finite loss or gradient";
      return result;
    }
    NetworkState next = result.state;
    OptimizerState nextOpt = result.optimizer;
    step(nextOpt, next, bg.gradients, opt, spec);
    if (!next.all_finite()) {
      result.failure = "batch " + std::to_string(b) + ": non-finite parameters after update";
      return result;
    }
    result.state = std::move(next);
    result.optimizer = std::move(nextOpt);
    result.log.push_back({b, t, bg.loss, sched.learningRate, sched.momentum});
    if (!validation.empty() && (b % cfg.evalInterval == 0 || b == cfg.batches)) {
      result.validation.push_back({b, metrics(classify_windows(result.state, spec, validation))});
    }
    if (stop && stop(result)) break;
  }
  return result;
}

std::string format_log_line(const TrainLogEntry& e) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld,%ld,%.9g,%.9g,%.9g", e.batch, e.t, e.loss, e.learningRate, e.momentum);
  return buf;
}

}  // namespace madnet
