#include "madnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "madnet/error.hpp"
#include "madnet/kernels.hpp"

namespace madnet {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::fullyConnected: return "fully-connected";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

ArchitectureConfig table1_architecture(int inputSide, int maxoutPieces, DropProfile drops) {
  ArchitectureConfig arch;
  arch.inputSide = inputSide;
  arch.stages = {{64, 5, 2, 3, 2}, {64, 5, 1, 3, 2}, {64, 5, 1, 3, 2}};
  arch.fullyConnectedUnits = 290;
  arch.maxoutPieces = maxoutPieces;
  arch.drops = std::move(drops);
  return arch;
}

ArchitectureConfig compact_architecture(int maps, int fullyConnectedUnits, int maxoutPieces, DropProfile drops) {
  ArchitectureConfig arch;
  arch.inputSide = 33;
  arch.stages = {{maps, 5, 2, 3, 2}, {maps, 3, 1, 3, 1}, {maps, 2, 1, 2, 1}};
  arch.fullyConnectedUnits = fullyConnectedUnits;
  arch.maxoutPieces = maxoutPieces;
  arch.drops = std::move(drops);
  return arch;
}

NetworkSpec build_network(const ArchitectureConfig& arch) {
  if (arch.drops.conv.size() != arch.stages.size()) {
    throw GeometryError("drop profile lists " + std::to_string(arch.drops.conv.size()) +
                        " conv probabilities for " + std::to_string(arch.stages.size()) + " stages");
  }
  NetworkSpec spec;
  spec.layers.push_back(
      {LayerKind::input, arch.inputChannels, arch.inputSide, 1, 1, arch.drops.input, 1, arch.centerInput});
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    const StageConfig& st = arch.stages[s];
    spec.layers.push_back(
        {LayerKind::conv, st.maps, 0, st.filterSize, st.convStride, arch.drops.conv[s], arch.maxoutPieces});
    spec.layers.push_back({LayerKind::maxpool, 0, 0, st.poolExtent, st.poolStride, 0.0, 1});
  }
  spec.layers.push_back({LayerKind::fullyConnected, arch.fullyConnectedUnits, 0, 1, 1, arch.drops.fullyConnected,
                         arch.maxoutPieces});
  spec.layers.push_back({LayerKind::softmax, 2, 0, 1, 1, 0.0, 1});
  validate(spec);
  return spec;
}

NetworkSpec build_table1_network(int inputSide, int maxoutPieces, const DropProfile& drops) {
  return build_network(table1_architecture(inputSide, maxoutPieces, drops));
}

namespace {

std::string layer_name(std::size_t index, const LayerSpec& layer) {
  return "layer " + std::to_string(index) + " (" + to_string(layer.kind) + ")";
}

bool is_spatial(const Shape& s) { return s.size() == 3; }

// Shapes and checks in one pass; validate() and layer_shapes() share it.
std::vector<Shape> chain_shapes(const NetworkSpec& spec) {
  const auto& layers = spec.layers;
  if (layers.empty()) throw GeometryError("network has no layers");
  if (layers.front().kind != LayerKind::input) throw GeometryError("first layer must be the input layer");
  std::vector<Shape> shapes;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string name = layer_name(i, l);
    if (!(l.dropProbability >= 0.0 && l.dropProbability < 1.0)) {
      throw GeometryError(name + ": drop probability must lie in [0, 1)");
    }
    if (l.maxoutPieces < 1) throw GeometryError(name + ": maxout pieces must be >= 1");
    if (i > 0 && l.kind == LayerKind::input) throw GeometryError(name + ": input layer must come first");
    if (l.kind != LayerKind::input && l.centerInput) throw GeometryError(name + ": only the input layer can center");
    if ((l.kind == LayerKind::maxpool || l.kind == LayerKind::softmax) && l.dropProbability != 0.0) {
      throw GeometryError(name + ": drop probability belongs to the producing conv/fully-connected layer");
    }
    switch (l.kind) {
      case LayerKind::input:
        if (l.outputs < 1 || l.side < 1) throw GeometryError(name + ": channels and side must be positive");
        shapes.push_back({static_cast<std::size_t>(l.outputs), static_cast<std::size_t>(l.side),
                          static_cast<std::size_t>(l.side)});
        break;
      case LayerKind::conv: {
        const Shape& in = shapes.back();
        if (!is_spatial(in)) throw GeometryError(name + ": conv must follow a spatial layer");
        if (l.outputs < 1) throw GeometryError(name + ": map count must be positive");
        ConvGeometry g{static_cast<int>(in[1]), l.filterSize, 0, l.stride, static_cast<int>(in[0]),
                       l.outputs * l.maxoutPieces};
        int out = 0;
        try {
          out = conv_output_size(g);
        } catch (const GeometryError& e) {
          throw GeometryError(name + ": " + e.what());
        }
        shapes.push_back(
            {static_cast<std::size_t>(l.outputs), static_cast<std::size_t>(out), static_cast<std::size_t>(out)});
        break;
      }
      case LayerKind::maxpool: {
        const Shape& in = shapes.back();
        if (!is_spatial(in)) throw GeometryError(name + ": maxpool must follow a spatial layer");
        if (l.maxoutPieces != 1) throw GeometryError(name + ": maxpool has no maxout pieces");
        int out = 0;
        try {
          out = pool_output_size({static_cast<int>(in[1]), l.filterSize, l.stride});
        } catch (const GeometryError& e) {
          throw GeometryError(name + ": " + e.what());
        }
        shapes.push_back({in[0], static_cast<std::size_t>(out), static_cast<std::size_t>(out)});
        break;
      }
      case LayerKind::fullyConnected:
        if (l.outputs < 1) throw GeometryError(name + ": unit count must be positive");
        shapes.push_back({static_cast<std::size_t>(l.outputs)});
        break;
      case LayerKind::softmax:
        if (i + 1 != layers.size()) throw GeometryError(name + ": softmax must be the last layer");
        if (l.outputs != 2 || l.maxoutPieces != 1) {
          throw GeometryError(name + ": softmax must have exactly 2 units and no maxout");
        }
        shapes.push_back({2});
        break;
      default:
        throw GeometryError(name + ": unknown layer kind");
    }
  }
  if (layers.back().kind != LayerKind::softmax) throw GeometryError("last layer must be a 2-way softmax");
  return shapes;
}

// Drop probability applied to each layer's output. A conv layer's dropout is
// applied after its pooling layer, where the stage output feeds the next weights.
std::vector<double> applied_drops(const NetworkSpec& spec) {
  const auto& layers = spec.layers;
  std::vector<double> drops(layers.size(), 0.0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::input:
      case LayerKind::fullyConnected:
        drops[i] = l.dropProbability;
        break;
      case LayerKind::conv:
        if (i + 1 >= layers.size() || layers[i + 1].kind != LayerKind::maxpool) drops[i] = l.dropProbability;
        break;
      case LayerKind::maxpool:
        if (layers[i - 1].kind == LayerKind::conv) drops[i] = layers[i - 1].dropProbability;
        break;
      default:
        break;
    }
  }
  return drops;
}

std::size_t fan_in(const Shape& in) { return shape_size(in); }

void check_finite(const Tensor& t, std::size_t index, const LayerSpec& layer) {
  if (!t.all_finite()) throw NumericError("non-finite activation in " + layer_name(index, layer));
}

}  // namespace

void validate(const NetworkSpec& spec) { chain_shapes(spec); }

std::vector<Shape> layer_shapes(const NetworkSpec& spec) { return chain_shapes(spec); }

std::vector<std::optional<double>> drop_profile(const NetworkSpec& spec) {
  std::vector<std::optional<double>> out;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::maxpool || l.kind == LayerKind::softmax) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(l.dropProbability);
    }
  }
  return out;
}

std::size_t NetworkState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool NetworkState::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const LayerParams& l) { return l.weights.all_finite() && l.bias.all_finite(); });
}

NetworkState zero_state(const NetworkSpec& spec) {
  const std::vector<Shape> shapes = chain_shapes(spec);
  NetworkState state;
  state.layers.resize(spec.layers.size());
  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const Shape& in = shapes[i - 1];
    const auto linear = static_cast<std::size_t>(l.outputs * l.maxoutPieces);
    switch (l.kind) {
      case LayerKind::conv:
        state.layers[i].weights =
            Tensor({linear, in[0], static_cast<std::size_t>(l.filterSize), static_cast<std::size_t>(l.filterSize)});
        state.layers[i].bias = Tensor({linear});
        break;
      case LayerKind::fullyConnected:
      case LayerKind::softmax:
        state.layers[i].weights = Tensor({linear, fan_in(in)});
        state.layers[i].bias = Tensor({linear});
        break;
      default:
        break;
    }
  }
  return state;
}

NetworkState init_state(const NetworkSpec& spec, SeededRng& rng) {
  NetworkState state = zero_state(spec);
  for (auto& layer : state.layers) {
    if (layer.weights.empty()) continue;
    const std::size_t fanIn = layer.weights.size() / layer.weights.extent(0);
    const double halfWidth = 1.0 / std::sqrt(static_cast<double>(fanIn));
    for (double& w : layer.weights.data()) w = rng.uniform(-halfWidth, halfWidth);
  }
  return state;
}

MaxoutResult maxout_forward(const Tensor& linear, int pieces) {
  if (pieces < 1) throw ShapeError("maxout pieces must be >= 1");
  const auto k = static_cast<std::size_t>(pieces);
  Shape outShape = linear.shape();
  std::size_t inner = 1;
  if (linear.rank() == 1) {
    if (outShape[0] % k != 0) {
      throw ShapeError("maxout: " + std::to_string(outShape[0]) + " units not divisible by k=" + std::to_string(k));
    }
    outShape[0] /= k;
  } else if (linear.rank() == 3) {
    if (outShape[0] % k != 0) {
      throw ShapeError("maxout: " + std::to_string(outShape[0]) + " maps not divisible by k=" + std::to_string(k));
    }
    outShape[0] /= k;
    inner = outShape[1] * outShape[2];
  } else {
    throw ShapeError("maxout expects rank 1 or rank 3, got " + shape_string(linear.shape()));
  }
  MaxoutResult result{Tensor(outShape), std::vector<std::uint32_t>(shape_size(outShape))};
  const std::size_t units = outShape[0];
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t p = 0; p < inner; ++p) {
      std::uint32_t best = 0;
      double bestValue = linear[(u * k) * inner + p];
      for (std::size_t j = 1; j < k; ++j) {
        const double v = linear[(u * k + j) * inner + p];
        if (v > bestValue) {
          bestValue = v;
          best = static_cast<std::uint32_t>(j);
        }
      }
      result.output[u * inner + p] = bestValue;
      result.winners[u * inner + p] = best;
    }
  }
  return result;
}

Tensor maxout_backward(std::span<const std::uint32_t> winners, const Tensor& upstream, int pieces) {
  const auto k = static_cast<std::size_t>(pieces);
  if (winners.size() != upstream.size()) throw ShapeError("maxout winners do not match upstream gradient");
  Shape linearShape = upstream.shape();
  linearShape[0] *= k;
  const std::size_t inner = upstream.rank() == 3 ? linearShape[1] * linearShape[2] : 1;
  Tensor grad(linearShape);
  const std::size_t units = upstream.extent(0);
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t p = 0; p < inner; ++p) {
      const std::size_t o = u * inner + p;
      if (winners[o] >= k) throw ShapeError("maxout winner index out of range");
      grad[(u * k + winners[o]) * inner + p] = upstream[o];
    }
  }
  return grad;
}

Tensor dropout_mask(double p, const Shape& shape, SeededRng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw Error("dropout probability must lie in [0, 1), got " + std::to_string(p));
  Tensor mask(shape, 1.0);
  if (p == 0.0) return mask;
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.data()) m = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

namespace {

ConvGeometry conv_geometry(const LayerSpec& l, const Tensor& input) {
  return {static_cast<int>(input.extent(1)), l.filterSize, 0, l.stride, static_cast<int>(input.extent(0)),
          l.outputs * l.maxoutPieces};
}

PoolGeometry pool_geometry(const LayerSpec& l, const Shape& input) {
  return {static_cast<int>(input[1]), l.filterSize, l.stride};
}

// z = W x + b for a fully-connected layer.
Tensor dense_forward(const LayerParams& params, const Tensor& x) {
  const std::size_t rows = params.weights.extent(0);
  const std::size_t cols = params.weights.extent(1);
  if (x.size() != cols) {
    throw ShapeError("fully-connected input has " + std::to_string(x.size()) + " values, weights expect " +
                     std::to_string(cols));
  }
  Tensor z({rows});
  const auto w = params.weights.data();
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = params.bias[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) sum += row[c] * xv[c];
    z[r] = sum;
  }
  return z;
}

// Accumulates dW = g x^T, db = g and returns W^T g reshaped like x.
Tensor dense_backward(const LayerParams& params, const Tensor& x, const Tensor& g, LayerParams& grads) {
  const std::size_t rows = params.weights.extent(0);
  const std::size_t cols = params.weights.extent(1);
  Tensor gx(x.shape());
  auto gw = grads.weights.data();
  const auto w = params.weights.data();
  const auto xv = x.data();
  auto gxv = gx.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    grads.bias[r] = gr;
    double* gwRow = gw.data() + r * cols;
    const double* wRow = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      gwRow[c] = gr * xv[c];
      gxv[c] += gr * wRow[c];
    }
  }
  return gx;
}

void apply_mask(Tensor& t, const Tensor& mask) {
  auto v = t.data();
  const auto m = mask.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= m[i];
}

}  // namespace

namespace {

void center_channels(Tensor& x) {
  const std::size_t channels = x.extent(0);
  const std::size_t plane = x.size() / channels;
  auto d = x.data();
  for (std::size_t c = 0; c < channels; ++c) {
    double* p = d.data() + c * plane;
    double mean = 0.0;
    for (std::size_t k = 0; k < plane; ++k) mean += p[k];
    mean /= static_cast<double>(plane);
    for (std::size_t k = 0; k < plane; ++k) p[k] -= mean;
  }
}

}  // namespace

ForwardResult forward(const NetworkState& state, const NetworkSpec& spec, const Tensor& window, Mode mode,
                      SeededRng* rng) {
  const std::vector<Shape> shapes = chain_shapes(spec);
  require_shape(window, shapes.front(), "network input window");
  if (state.layers.size() != spec.layers.size()) throw ShapeError("network state does not match spec layer count");
  const std::vector<double> drops = applied_drops(spec);
  const bool train = mode == Mode::train;
  if (train && !rng && std::any_of(drops.begin(), drops.end(), [](double p) { return p > 0.0; })) {
    throw Error("train-mode forward with dropout needs a random source");
  }

  ForwardResult result;
  ForwardTrace trace;
  if (train) trace.layers.resize(spec.layers.size());

  Tensor x = window;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const LayerParams& params = state.layers[i];
    LayerTrace* lt = train ? &trace.layers[i] : nullptr;
    if (lt && l.kind != LayerKind::input) lt->input = x;

    switch (l.kind) {
      case LayerKind::input:
        if (l.centerInput) center_channels(x);
        break;
      case LayerKind::conv: {
        Tensor z = conv2d_forward(x, params.weights, params.bias, conv_geometry(l, x));
        MaxoutResult mo = maxout_forward(z, l.maxoutPieces);
        if (lt) {
          lt->linear = std::move(z);
          lt->winners = std::move(mo.winners);
        }
        x = std::move(mo.output);
        break;
      }
      case LayerKind::maxpool: {
        PoolResult pooled = maxpool_forward(x, pool_geometry(l, x.shape()));
        if (lt) lt->argmax = std::move(pooled.argmax);
        x = std::move(pooled.output);
        break;
      }
      case LayerKind::fullyConnected: {
        Tensor z = dense_forward(params, x);
        MaxoutResult mo = maxout_forward(z, l.maxoutPieces);
        if (lt) {
          lt->linear = std::move(z);
          lt->winners = std::move(mo.winners);
        }
        x = std::move(mo.output);
        break;
      }
      case LayerKind::softmax: {
        Tensor logits = dense_forward(params, x);
        check_finite(logits, i, l);
        const double top = std::max(logits[0], logits[1]);
        const double e0 = std::exp(logits[0] - top);
        const double e1 = std::exp(logits[1] - top);
        x = Tensor({2}, {e0 / (e0 + e1), e1 / (e0 + e1)});
        if (train) trace.logits = std::move(logits);
        break;
      }
    }
    if (train && drops[i] > 0.0) {
      Tensor mask = dropout_mask(drops[i], x.shape(), *rng);
      apply_mask(x, mask);
      lt->mask = std::move(mask);
    }
    check_finite(x, i, l);
    if (lt) lt->output = x;
  }
  result.probabilities = std::move(x);
  if (train) result.trace = std::move(trace);
  return result;
}

LossAndGradients loss_and_backward(const NetworkState& state, const NetworkSpec& spec,
                                   const std::optional<ForwardTrace>& trace, Label label) {
  if (!trace) throw Error("loss_and_backward needs the trace of a train-mode forward pass");
  if (trace->layers.size() != spec.layers.size()) throw ShapeError("trace does not match network spec");
  const std::size_t target = static_cast<std::size_t>(label);
  const Tensor& logits = trace->logits;
  const double top = std::max(logits[0], logits[1]);
  const double logSum = top + std::log(std::exp(logits[0] - top) + std::exp(logits[1] - top));

  LossAndGradients out;
  out.loss = logSum - logits[target];
  out.gradients = zero_state(spec);

  const std::size_t last = spec.layers.size() - 1;
  Tensor g({2});
  for (std::size_t c = 0; c < 2; ++c) {
    g[c] = std::exp(logits[c] - logSum) - (c == target ? 1.0 : 0.0);
  }
  Tensor grad = dense_backward(state.layers[last], trace->layers[last].input, g, out.gradients.layers[last]);

  for (std::size_t i = last; i-- > 1;) {
    const LayerSpec& l = spec.layers[i];
    const LayerTrace& lt = trace->layers[i];
    LayerParams& lg = out.gradients.layers[i];
    grad.reshape(lt.output.shape());
    if (!lt.mask.empty()) apply_mask(grad, lt.mask);
    switch (l.kind) {
      case LayerKind::conv: {
        Tensor gz = maxout_backward(lt.winners, grad, l.maxoutPieces);
        ConvGradients cg = conv2d_backward(lt.input, state.layers[i].weights, conv_geometry(l, lt.input), gz);
        lg.weights = std::move(cg.weights);
        lg.bias = std::move(cg.bias);
        grad = std::move(cg.input);
        break;
      }
      case LayerKind::maxpool:
        grad = maxpool_backward(lt.argmax, grad, pool_geometry(l, lt.input.shape()));
        break;
      case LayerKind::fullyConnected: {
        Tensor gz = maxout_backward(lt.winners, grad, l.maxoutPieces);
        grad = dense_backward(state.layers[i], lt.input, gz, lg);
        break;
      }
      default:
        throw Error("unexpected layer kind in backward pass");
    }
  }
  if (!out.gradients.all_finite() || !std::isfinite(out.loss)) throw NumericError("non-finite gradient or loss");
  return out;
}

double predict_proba(const NetworkState& state, const NetworkSpec& spec, const Tensor& window) {
  return forward(state, spec, window, Mode::infer).probabilities[static_cast<std::size_t>(Label::MA)];
}

}  // namespace madnet
