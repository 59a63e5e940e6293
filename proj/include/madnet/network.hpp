#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "madnet/geometry.hpp"
#include "madnet/rng.hpp"
#include "madnet/tensor.hpp"
#include "madnet/types.hpp"

namespace madnet {

enum class LayerKind : std::uint32_t { input = 0, conv = 1, maxpool = 2, fullyConnected = 3, softmax = 4 };

const char* to_string(LayerKind kind);

/// One row of the layer table.
///
/// `outputs` is the channel count for the input layer, the number of output
/// maps for conv (after maxout), the number of units for fully-connected and
/// softmax layers, and ignored for maxpool. `filterSize` doubles as the
/// pooling extent. `side` is only meaningful on the input layer.
struct LayerSpec {
  LayerKind kind = LayerKind::input;
  int outputs = 0;
  int side = 0;
  int filterSize = 1;
  int stride = 1;
  double dropProbability = 0.0;
  int maxoutPieces = 1;
  /// Input layer only: subtract each channel's window mean before anything else.
  bool centerInput = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  int input_side() const { return layers.front().side; }
  int input_channels() const { return layers.front().outputs; }
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Drop probabilities per trainable stage: one per conv stage plus the input
/// image and the fully-connected hidden layer.
struct DropProfile {
  double input = 0.1;
  std::vector<double> conv{0.2, 0.2, 0.5};
  double fullyConnected = 0.5;

  static DropProfile none(std::size_t convStages = 3) { return {0.0, std::vector<double>(convStages, 0.0), 0.0}; }
};

struct StageConfig {
  int maps = 64;
  int filterSize = 5;
  int convStride = 1;
  int poolExtent = 3;
  int poolStride = 2;
};

/// Conv+maxpool stages, one fully-connected maxout layer, softmax over two classes.
struct ArchitectureConfig {
  int inputSide = 129;
  int inputChannels = 3;
  std::vector<StageConfig> stages;
  int fullyConnectedUnits = 290;
  int maxoutPieces = 2;
  DropProfile drops;
  bool centerInput = true;
};

ArchitectureConfig table1_architecture(int inputSide = 129, int maxoutPieces = 2, DropProfile drops = {});
/// Same layer kinds on a 33 x 33 window: 33 -> 15 -> 7 -> 5 -> 3 -> 2 -> 1, receptive field 33.
ArchitectureConfig compact_architecture(int maps = 16, int fullyConnectedUnits = 64, int maxoutPieces = 2,
                                        DropProfile drops = {});

NetworkSpec build_network(const ArchitectureConfig& arch);
NetworkSpec build_table1_network(int inputSide = 129, int maxoutPieces = 2, const DropProfile& drops = {});

/// Throws GeometryError unless the layers chain legally and end in a two-way softmax.
void validate(const NetworkSpec& spec);

/// Activation shape leaving each layer (after maxout, before dropout).
std::vector<Shape> layer_shapes(const NetworkSpec& spec);

/// Drop probability attached to each layer row; nullopt for maxpool and softmax rows.
std::vector<std::optional<double>> drop_profile(const NetworkSpec& spec);

struct LayerParams {
  Tensor weights;
  Tensor bias;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Parameters per layer; input and maxpool layers hold empty tensors.
/// Conv weights are [maps*k x depth x F x F], fully-connected weights [units*k x fanIn].
struct NetworkState {
  std::vector<LayerParams> layers;

  std::size_t parameter_count() const;
  bool all_finite() const;
  friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

using NetworkGradients = NetworkState;

NetworkState zero_state(const NetworkSpec& spec);
/// Weights uniform in +-1/sqrt(fanIn), biases zero.
NetworkState init_state(const NetworkSpec& spec, SeededRng& rng);

struct MaxoutResult {
  Tensor output;
  std::vector<std::uint32_t> winners;
};

/// Rank 1: consecutive groups of `pieces`. Rank 3 [C*k x H x W]: each output
/// map i takes the max over linear maps i*k .. i*k+k-1 at every pixel.
/// Ties resolve to the lowest piece.
MaxoutResult maxout_forward(const Tensor& linear, int pieces);
Tensor maxout_backward(std::span<const std::uint32_t> winners, const Tensor& upstream, int pieces);

/// Inverted dropout: each entry 0 with probability p, else 1/(1-p).
Tensor dropout_mask(double p, const Shape& shape, SeededRng& rng);

enum class Mode { train, infer };

struct LayerTrace {
  Tensor input;
  Tensor linear;
  std::vector<std::uint32_t> winners;
  std::vector<std::size_t> argmax;
  Tensor mask;
  Tensor output;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Tensor logits;
};

struct ForwardResult {
  Tensor probabilities;
  std::optional<ForwardTrace> trace;
};

/// Probabilities are ordered by Label: index 0 non-MA, index 1 MA.
/// Dropout masks are drawn from `rng` in train mode, which then must be non-null
/// whenever any drop probability is positive.
ForwardResult forward(const NetworkState& state, const NetworkSpec& spec, const Tensor& window, Mode mode,
                      SeededRng* rng = nullptr);

struct LossAndGradients {
  double loss = 0.0;
  NetworkGradients gradients;
};

/// Softmax negative log-likelihood of `label` and its gradient.
LossAndGradients loss_and_backward(const NetworkState& state, const NetworkSpec& spec,
                                   const std::optional<ForwardTrace>& trace, Label label);

double predict_proba(const NetworkState& state, const NetworkSpec& spec, const Tensor& window);

}  // namespace madnet
