#include <string>

#include "madnet/error.hpp"
#include "madnet/kernels.hpp"

namespace madnet::reference {

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& g) {
  const int os = detail::check_conv_shapes(input, weights, &bias, g);
  const int k = g.filterCount, d = g.inputDepth, m = g.inputSize, f = g.filterSize;
  Tensor out({static_cast<std::size_t>(k), static_cast<std::size_t>(os), static_cast<std::size_t>(os)});
  for (int o = 0; o < k; ++o) {
    for (int r = 0; r < os; ++r) {
      for (int c = 0; c < os; ++c) {
        double sum = bias[o];
        for (int ch = 0; ch < d; ++ch) {
          for (int i = 0; i < f; ++i) {
            const int y = r * g.stride - g.pad + i;
            if (y < 0 || y >= m) continue;
            for (int j = 0; j < f; ++j) {
              const int x = c * g.stride - g.pad + j;
              if (x < 0 || x >= m) continue;
              sum += input.at(ch, y, x) * weights[((static_cast<std::size_t>(o) * d + ch) * f + i) * f + j];
            }
          }
        }
        out.at(o, r, c) = sum;
      }
    }
  }
  return out;
}

ConvGradients conv2d_backward(const Tensor& input, const Tensor& weights, const ConvGeometry& g,
                              const Tensor& upstream) {
  const int os = detail::check_conv_shapes(input, weights, nullptr, g);
  const int k = g.filterCount, d = g.inputDepth, m = g.inputSize, f = g.filterSize;
  require_shape(upstream, {static_cast<std::size_t>(k), static_cast<std::size_t>(os), static_cast<std::size_t>(os)},
                "conv upstream gradient");
  ConvGradients grads{Tensor(input.shape()), Tensor(weights.shape()), Tensor({static_cast<std::size_t>(k)})};
  for (int o = 0; o < k; ++o) {
    for (int r = 0; r < os; ++r) {
      for (int c = 0; c < os; ++c) {
        const double up = upstream.at(o, r, c);
        grads.bias[o] += up;
        for (int ch = 0; ch < d; ++ch) {
          for (int i = 0; i < f; ++i) {
            const int y = r * g.stride - g.pad + i;
            if (y < 0 || y >= m) continue;
            for (int j = 0; j < f; ++j) {
              const int x = c * g.stride - g.pad + j;
              if (x < 0 || x >= m) continue;
              const std::size_t w = ((static_cast<std::size_t>(o) * d + ch) * f + i) * f + j;
              grads.weights[w] += up * input.at(ch, y, x);
              grads.input.at(ch, y, x) += up * weights[w];
            }
          }
        }
      }
    }
  }
  return grads;
}

PoolResult maxpool_forward(const Tensor& input, const PoolGeometry& g) {
  const int os = detail::check_pool_shapes(input, g);
  const std::size_t depth = input.extent(0);
  const auto m = static_cast<std::size_t>(g.inputSize);
  PoolResult result{Tensor({depth, static_cast<std::size_t>(os), static_cast<std::size_t>(os)}), {}};
  for (std::size_t ch = 0; ch < depth; ++ch) {
    for (int r = 0; r < os; ++r) {
      for (int c = 0; c < os; ++c) {
        std::size_t best = 0;
        bool first = true;
        for (int i = 0; i < g.extent; ++i) {
          for (int j = 0; j < g.extent; ++j) {
            const std::size_t idx = (ch * m + r * g.stride + i) * m + c * g.stride + j;
            if (first || input[idx] > input[best]) best = idx;
            first = false;
          }
        }
        result.output.at(ch, r, c) = input[best];
        result.argmax.push_back(best);
      }
    }
  }
  return result;
}

Tensor maxpool_backward(std::span<const std::size_t> argmax, const Tensor& upstream, const PoolGeometry& g) {
  pool_output_size(g);
  const std::size_t depth = upstream.extent(0);
  const auto m = static_cast<std::size_t>(g.inputSize);
  Tensor grad({depth, m, m});
  if (argmax.size() != upstream.size()) throw ShapeError("maxpool argmax count does not match upstream");
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    if (argmax[o] >= grad.size()) throw ShapeError("maxpool argmax index " + std::to_string(argmax[o]) + " out of range");
    grad[argmax[o]] += upstream[o];
  }
  return grad;
}

Tensor gaussian_blur(const Tensor& plane, double sigma) {
  if (plane.rank() != 2) throw ShapeError("gaussian_blur expects a rank-2 plane");
  const std::vector<double> taps = gaussian_kernel(sigma);
  const long h = static_cast<long>(plane.extent(0));
  const long w = static_cast<long>(plane.extent(1));
  const long radius = static_cast<long>(taps.size() / 2);
  Tensor out(plane.shape());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double sum = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        for (long j = -radius; j <= radius; ++j) {
          sum += taps[i + radius] * taps[j + radius] * plane.at(reflect_index(y + i, h), reflect_index(x + j, w));
        }
      }
      out.at(y, x) = sum;
    }
  }
  return out;
}

}  // namespace madnet::reference
