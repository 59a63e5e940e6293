#include "madnet/optimizer.hpp"

#include <cmath>
#include <string>

#include "madnet/error.hpp"

namespace madnet {

void OptimizerConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("optimizer: " + what); };
  if (!(epsilon0 > 0.0)) fail("epsilon0 must be > 0");
  if (!(decayFactor > 0.0 && decayFactor <= 1.0)) fail("decay_f must lie in (0, 1]");
  if (!(momentumInitial >= 0.0 && momentumInitial < 1.0)) fail("m_i must lie in [0, 1)");
  if (!(momentumFinal >= 0.0 && momentumFinal < 1.0)) fail("m_f must lie in [0, 1)");
  if (momentumInitial > momentumFinal) fail("m_i must not exceed m_f");
  if (rampSteps < 1) fail("T must be a positive integer");
  if (!(maxNorm > 0.0)) fail("max_norm_c must be > 0");
  if (batchSize < 1) fail("batch_size must be positive");
}

Schedule schedule(const OptimizerConfig& config, long t) {
  Schedule s;
  s.learningRate = config.epsilon0 * std::pow(config.decayFactor, static_cast<double>(t));
  if (t >= config.rampSteps) {
    s.momentum = config.momentumFinal;
    return s;
  }
  const double frac = static_cast<double>(t) / static_cast<double>(config.rampSteps);
  if (config.ramp == MomentumRamp::paper) {
    s.momentum = frac * config.momentumInitial + (1.0 - frac) * config.momentumFinal;
  } else {
    s.momentum = (1.0 - frac) * config.momentumInitial + frac * config.momentumFinal;
  }
  return s;
}

OptimizerState make_optimizer_state(const NetworkState& params) {
  OptimizerState state;
  state.velocity = params;
  for (auto& layer : state.velocity.layers) {
    layer.weights.fill(0.0);
    layer.bias.fill(0.0);
  }
  return state;
}

void maxnorm_project(Tensor& weights, double c) {
  if (weights.empty()) return;
  if (weights.rank() != 2) throw ShapeError("max-norm projection expects a [units x fanIn] matrix");
  const std::size_t rows = weights.extent(0);
  const std::size_t cols = weights.extent(1);
  auto w = weights.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w.data() + r * cols;
    double sq = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sq += row[j] * row[j];
    const double norm = std::sqrt(sq);
    if (norm > c) {
      const double scale = c / norm;
      for (std::size_t j = 0; j < cols; ++j) row[j] *= scale;
    }
  }
}

namespace {

void update(Tensor& param, Tensor& velocity, const Tensor& grad, double momentum, double lr) {
  require_shape(grad, param.shape(), "optimizer gradient");
  require_shape(velocity, param.shape(), "optimizer velocity");
  auto p = param.data();
  auto v = velocity.data();
  const auto g = grad.data();
  const double gradScale = (1.0 - momentum) * lr;
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] - gradScale * g[i];
    p[i] += v[i];
  }
}

}  // namespace

void step(OptimizerState& state, NetworkState& params, const NetworkGradients& grads, const OptimizerConfig& config,
          const NetworkSpec& spec) {
  if (params.layers.size() != grads.layers.size() || params.layers.size() != state.velocity.layers.size() ||
      params.layers.size() != spec.layers.size()) {
    throw ShapeError("optimizer: parameter, gradient and velocity layer counts differ");
  }
  const Schedule s = schedule(config, state.iteration);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    LayerParams& p = params.layers[i];
    if (p.weights.empty()) continue;
    update(p.weights, state.velocity.layers[i].weights, grads.layers[i].weights, s.momentum, s.learningRate);
    update(p.bias, state.velocity.layers[i].bias, grads.layers[i].bias, s.momentum, s.learningRate);
    const LayerKind kind = spec.layers[i].kind;
    if (kind == LayerKind::fullyConnected || kind == LayerKind::softmax) maxnorm_project(p.weights, config.maxNorm);
  }
  ++state.iteration;
}

}  // namespace madnet
