#pragma once

#include "madnet/network.hpp"

namespace madnet {

/// `standard` ramps momentum up from m_i to m_f over T steps. `paper` uses
/// (t/T) m_i + (1 - t/T) m_f, which runs from m_f toward m_i before snapping
/// to m_f at T.
enum class MomentumRamp { standard, paper };

struct OptimizerConfig {
  double epsilon0 = 0.01;
  double decayFactor = 0.9995;
  double momentumInitial = 0.5;
  double momentumFinal = 0.99;
  long rampSteps = 20000;
  double maxNorm = 3.0;
  int batchSize = 128;
  MomentumRamp ramp = MomentumRamp::standard;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct Schedule {
  double learningRate = 0.0;
  double momentum = 0.0;
};

/// Learning rate eps0 * f^t and the momentum ramp at iteration t (counted in batches).
Schedule schedule(const OptimizerConfig& config, long t);

struct OptimizerState {
  long iteration = 0;
  NetworkState velocity;
};

OptimizerState make_optimizer_state(const NetworkState& params);

/// Momentum update with batch-averaged gradients, then max-norm projection of
/// every fully-connected and softmax unit's incoming weights.
void step(OptimizerState& state, NetworkState& params, const NetworkGradients& grads, const OptimizerConfig& config,
          const NetworkSpec& spec);

/// Rows of `weights` (rank 2, one row per unit) with L2 norm above c are rescaled to norm c.
void maxnorm_project(Tensor& weights, double c);

}  // namespace madnet
