#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "madnet/geometry.hpp"
#include "madnet/tensor.hpp"

namespace madnet {

struct ConvGradients {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

struct PoolResult {
  Tensor output;
  /// Flat input index of the winning element per output cell.
  std::vector<std::size_t> argmax;
};

// OpenMP kernels. Convolution goes through im2col and a row-parallel GEMM;
// every output element is owned by one thread, so results do not depend on
// the thread count.

/// Cross-correlation, zero padding. input [D x M x M], weights [K x D x F x F],
/// bias [K] -> [K x Mo x Mo].
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& g);
ConvGradients conv2d_backward(const Tensor& input, const Tensor& weights, const ConvGeometry& g,
                              const Tensor& upstream);

/// Ties go to the first element in row-major order.
PoolResult maxpool_forward(const Tensor& input, const PoolGeometry& g);
/// Routes gradients to argmax cells, accumulating where overlapping windows share a winner.
Tensor maxpool_backward(std::span<const std::size_t> argmax, const Tensor& upstream, const PoolGeometry& g);

/// Half-sample symmetric reflection of i into [0, n): -1 -> 0, n -> n-1.
/// Valid for any offset, not only one reflection deep.
inline std::size_t reflect_index(long i, long n) {
  const long period = 2 * n;
  long r = i % period;
  if (r < 0) r += period;
  return static_cast<std::size_t>(r < n ? r : period - 1 - r);
}

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma); sigma = 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur of an [H x W] plane with reflected borders.
Tensor gaussian_blur(const Tensor& plane, double sigma);

/// Row-major C[m x n] (+)= A[m x k] * B[k x n], rows of C split across threads.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate = false);
/// C[m x n] = A[m x k] * B[n x k]^T.
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n);
/// C[m x n] = A[k x m]^T * B[k x n].
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n);

namespace reference {

// Serial direct-loop versions of the kernels above, kept as test oracles and
// as the baseline in bench_kernels.

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& g);
ConvGradients conv2d_backward(const Tensor& input, const Tensor& weights, const ConvGeometry& g,
                              const Tensor& upstream);
PoolResult maxpool_forward(const Tensor& input, const PoolGeometry& g);
Tensor maxpool_backward(std::span<const std::size_t> argmax, const Tensor& upstream, const PoolGeometry& g);
/// Direct (non-separable) 2-D Gaussian.
Tensor gaussian_blur(const Tensor& plane, double sigma);

}  // namespace reference

// Shape checks shared by both implementations.
namespace detail {
int check_conv_shapes(const Tensor& input, const Tensor& weights, const Tensor* bias, const ConvGeometry& g);
int check_pool_shapes(const Tensor& input, const PoolGeometry& g);
}  // namespace detail

}  // namespace madnet
