#include "madnet/kernels.hpp"

#include <cmath>
#include <string>

#include "madnet/error.hpp"

namespace madnet {

namespace detail {

int check_conv_shapes(const Tensor& input, const Tensor& weights, const Tensor* bias, const ConvGeometry& g) {
  const int outSize = conv_output_size(g);
  const auto d = static_cast<std::size_t>(g.inputDepth);
  const auto m = static_cast<std::size_t>(g.inputSize);
  const auto f = static_cast<std::size_t>(g.filterSize);
  const auto k = static_cast<std::size_t>(g.filterCount);
  require_shape(input, {d, m, m}, "conv input (depth x rows x cols)");
  require_shape(weights, {k, d, f, f}, "conv weights (filters x depth x rows x cols)");
  if (bias) require_shape(*bias, {k}, "conv bias (filters)");
  return outSize;
}

int check_pool_shapes(const Tensor& input, const PoolGeometry& g) {
  const int outSize = pool_output_size(g);
  if (input.rank() != 3) throw ShapeError("maxpool input must be rank 3, got " + shape_string(input.shape()));
  const auto m = static_cast<std::size_t>(g.inputSize);
  require_shape(input, {input.extent(0), m, m}, "maxpool input (depth x rows x cols)");
  return outSize;
}

}  // namespace detail

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = pc + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    const double* arow = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double sum = 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
      pc[i * n + j] = sum;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n) {
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = pc + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[p * m + i];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

namespace {

// col is [(D*F*F) x (Mo*Mo)].
std::vector<double> im2col(const Tensor& input, const ConvGeometry& g, int outSize) {
  const int d = g.inputDepth, m = g.inputSize, f = g.filterSize, s = g.stride, p = g.pad;
  const std::size_t cols = static_cast<std::size_t>(outSize) * outSize;
  std::vector<double> col(static_cast<std::size_t>(d) * f * f * cols, 0.0);
  const double* in = input.data().data();
#pragma omp parallel for schedule(static)
  for (int row = 0; row < d * f * f; ++row) {
    const int c = row / (f * f);
    const int ky = (row / f) % f;
    const int kx = row % f;
    double* dst = col.data() + static_cast<std::size_t>(row) * cols;
    const double* plane = in + static_cast<std::size_t>(c) * m * m;
    for (int oy = 0; oy < outSize; ++oy) {
      const int iy = oy * s - p + ky;
      if (iy < 0 || iy >= m) continue;
      for (int ox = 0; ox < outSize; ++ox) {
        const int ix = ox * s - p + kx;
        if (ix >= 0 && ix < m) dst[oy * outSize + ox] = plane[iy * m + ix];
      }
    }
  }
  return col;
}

void col2im(const std::vector<double>& col, Tensor& gradInput, const ConvGeometry& g, int outSize) {
  const int d = g.inputDepth, m = g.inputSize, f = g.filterSize, s = g.stride, p = g.pad;
  const std::size_t cols = static_cast<std::size_t>(outSize) * outSize;
  double* out = gradInput.data().data();
  // Parallel over input channels: each channel's rows write only its own plane.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < d; ++c) {
    double* plane = out + static_cast<std::size_t>(c) * m * m;
    for (int ky = 0; ky < f; ++ky) {
      for (int kx = 0; kx < f; ++kx) {
        const double* src = col.data() + (static_cast<std::size_t>(c) * f * f + ky * f + kx) * cols;
        for (int oy = 0; oy < outSize; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= m) continue;
          for (int ox = 0; ox < outSize; ++ox) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < m) plane[iy * m + ix] += src[oy * outSize + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& g) {
  const int outSize = detail::check_conv_shapes(input, weights, &bias, g);
  const auto k = static_cast<std::size_t>(g.filterCount);
  const std::size_t inner = static_cast<std::size_t>(g.inputDepth) * g.filterSize * g.filterSize;
  const std::size_t cols = static_cast<std::size_t>(outSize) * outSize;
  const std::vector<double> col = im2col(input, g, outSize);

  Tensor out({k, static_cast<std::size_t>(outSize), static_cast<std::size_t>(outSize)});
  auto o = out.data();
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t j = 0; j < cols; ++j) o[f * cols + j] = bias[f];
  }
  gemm(weights.data(), col, o, k, inner, cols, /*accumulate=*/true);
  return out;
}

ConvGradients conv2d_backward(const Tensor& input, const Tensor& weights, const ConvGeometry& g,
                              const Tensor& upstream) {
  const int outSize = detail::check_conv_shapes(input, weights, nullptr, g);
  const auto k = static_cast<std::size_t>(g.filterCount);
  const auto os = static_cast<std::size_t>(outSize);
  require_shape(upstream, {k, os, os}, "conv upstream gradient (filters x rows x cols)");
  const std::size_t inner = static_cast<std::size_t>(g.inputDepth) * g.filterSize * g.filterSize;
  const std::size_t cols = os * os;

  ConvGradients grads{Tensor(input.shape()), Tensor(weights.shape()), Tensor({k})};
  const auto up = upstream.data();
  for (std::size_t f = 0; f < k; ++f) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += up[f * cols + j];
    grads.bias[f] = sum;
  }

  const std::vector<double> col = im2col(input, g, outSize);
  gemm_nt(up, col, grads.weights.data(), k, cols, inner);

  std::vector<double> gradCol(inner * cols);
  gemm_tn(weights.data(), up, gradCol, inner, k, cols);
  col2im(gradCol, grads.input, g, outSize);
  return grads;
}

PoolResult maxpool_forward(const Tensor& input, const PoolGeometry& g) {
  const int outSize = detail::check_pool_shapes(input, g);
  const std::size_t depth = input.extent(0);
  const int m = g.inputSize;
  const auto os = static_cast<std::size_t>(outSize);
  PoolResult result{Tensor({depth, os, os}), std::vector<std::size_t>(depth * os * os)};
  const double* in = input.data().data();
  double* out = result.output.data().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(depth); ++c) {
    const std::size_t planeOffset = static_cast<std::size_t>(c) * m * m;
    for (int oy = 0; oy < outSize; ++oy) {
      for (int ox = 0; ox < outSize; ++ox) {
        std::size_t best = planeOffset + static_cast<std::size_t>(oy * g.stride) * m + ox * g.stride;
        for (int wy = 0; wy < g.extent; ++wy) {
          const std::size_t rowStart = planeOffset + static_cast<std::size_t>(oy * g.stride + wy) * m;
          for (int wx = 0; wx < g.extent; ++wx) {
            const std::size_t idx = rowStart + ox * g.stride + wx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * os + oy) * os + ox;
        out[o] = in[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor maxpool_backward(std::span<const std::size_t> argmax, const Tensor& upstream, const PoolGeometry& g) {
  const int outSize = pool_output_size(g);
  if (upstream.rank() != 3) throw ShapeError("maxpool upstream must be rank 3");
  const std::size_t depth = upstream.extent(0);
  const auto os = static_cast<std::size_t>(outSize);
  require_shape(upstream, {depth, os, os}, "maxpool upstream gradient");
  if (argmax.size() != upstream.size()) {
    throw ShapeError("maxpool argmax count " + std::to_string(argmax.size()) + " != upstream size " +
                     std::to_string(upstream.size()));
  }
  const auto m = static_cast<std::size_t>(g.inputSize);
  Tensor grad({depth, m, m});
  const std::size_t planeSize = m * m;
  const std::size_t cellsPerPlane = os * os;
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    const std::size_t lo = (o / cellsPerPlane) * planeSize;
    if (argmax[o] < lo || argmax[o] >= lo + planeSize) {
      throw ShapeError("maxpool argmax index " + std::to_string(argmax[o]) + " outside its channel plane");
    }
  }
  // Winners of a channel lie in that channel's plane, so channels are independent.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(depth); ++c) {
    for (std::size_t i = 0; i < cellsPerPlane; ++i) {
      const std::size_t o = static_cast<std::size_t>(c) * cellsPerPlane + i;
      grad[argmax[o]] += upstream[o];
    }
  }
  return grad;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma)) throw Error("gaussian sigma must be finite and >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    taps[i + radius] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

Tensor gaussian_blur(const Tensor& plane, double sigma) {
  if (plane.rank() != 2) throw ShapeError("gaussian_blur expects a rank-2 plane, got " + shape_string(plane.shape()));
  const std::vector<double> taps = gaussian_kernel(sigma);
  if (taps.size() == 1) return plane;
  const long h = static_cast<long>(plane.extent(0));
  const long w = static_cast<long>(plane.extent(1));
  const long radius = static_cast<long>(taps.size() / 2);

  Tensor rows(plane.shape());
#pragma omp parallel for schedule(static)
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double sum = 0.0;
      for (long t = -radius; t <= radius; ++t) sum += taps[t + radius] * plane.at(y, reflect_index(x + t, w));
      rows.at(y, x) = sum;
    }
  }
  Tensor out(plane.shape());
#pragma omp parallel for schedule(static)
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double sum = 0.0;
      for (long t = -radius; t <= radius; ++t) sum += taps[t + radius] * rows.at(reflect_index(y + t, h), x);
      out.at(y, x) = sum;
    }
  }
  return out;
}

}  // namespace madnet
