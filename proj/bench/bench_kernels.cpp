#include <benchmark/benchmark.h>

#include "madnet/kernels.hpp"
#include "madnet/rng.hpp"

namespace {

using namespace madnet;

struct ConvCase {
  ConvGeometry g;
  Tensor input;
  Tensor weights;
  Tensor bias;
};

Tensor random_tensor(Shape shape, SeededRng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// The three conv rows of the 129 x 129 network, 64 maps with two maxout pieces.
ConvCase conv_case(int layer) {
  static const ConvGeometry geometries[] = {{129, 5, 0, 2, 3, 128}, {31, 5, 0, 1, 64, 128}, {13, 5, 0, 1, 64, 128}};
  SeededRng rng(static_cast<std::uint64_t>(layer) + 1);
  const ConvGeometry g = geometries[layer];
  const auto m = static_cast<std::size_t>(g.inputSize);
  const auto f = static_cast<std::size_t>(g.filterSize);
  ConvCase c{g, random_tensor({static_cast<std::size_t>(g.inputDepth), m, m}, rng),
             random_tensor({static_cast<std::size_t>(g.filterCount), static_cast<std::size_t>(g.inputDepth), f, f}, rng),
             random_tensor({static_cast<std::size_t>(g.filterCount)}, rng)};
  return c;
}

void BM_ConvForwardParallel(benchmark::State& state) {
  const ConvCase c = conv_case(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(c.input, c.weights, c.bias, c.g));
}

void BM_ConvForwardReference(benchmark::State& state) {
  const ConvCase c = conv_case(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward(c.input, c.weights, c.bias, c.g));
}

void BM_ConvBackwardParallel(benchmark::State& state) {
  const ConvCase c = conv_case(static_cast<int>(state.range(0)));
  const Tensor up(Shape{static_cast<std::size_t>(c.g.filterCount), static_cast<std::size_t>(conv_output_size(c.g)),
                        static_cast<std::size_t>(conv_output_size(c.g))},
                  1.0);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(c.input, c.weights, c.g, up));
}

void BM_ConvBackwardReference(benchmark::State& state) {
  const ConvCase c = conv_case(static_cast<int>(state.range(0)));
  const Tensor up(Shape{static_cast<std::size_t>(c.g.filterCount), static_cast<std::size_t>(conv_output_size(c.g)),
                        static_cast<std::size_t>(conv_output_size(c.g))},
                  1.0);
  for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_backward(c.input, c.weights, c.g, up));
}

Tensor pool_input(int layer) {
  static const std::size_t sides[] = {63, 27, 9};
  SeededRng rng(static_cast<std::uint64_t>(layer) + 11);
  return random_tensor({64, sides[layer], sides[layer]}, rng);
}

void BM_MaxpoolParallel(benchmark::State& state) {
  const Tensor in = pool_input(static_cast<int>(state.range(0)));
  const PoolGeometry g{static_cast<int>(in.extent(1)), 3, 2};
  for (auto _ : state) benchmark::DoNotOptimize(maxpool_forward(in, g));
}

void BM_MaxpoolReference(benchmark::State& state) {
  const Tensor in = pool_input(static_cast<int>(state.range(0)));
  const PoolGeometry g{static_cast<int>(in.extent(1)), 3, 2};
  for (auto _ : state) benchmark::DoNotOptimize(reference::maxpool_forward(in, g));
}

void BM_BlurParallel(benchmark::State& state) {
  SeededRng rng(5);
  const Tensor plane = random_tensor({129, 129}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(plane, static_cast<double>(state.range(0))));
}

void BM_BlurReference(benchmark::State& state) {
  SeededRng rng(5);
  const Tensor plane = random_tensor({129, 129}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(reference::gaussian_blur(plane, static_cast<double>(state.range(0))));
}

}  // namespace

BENCHMARK(BM_ConvForwardParallel)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParallel)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxpoolParallel)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxpoolReference)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BlurParallel)->Arg(1)->Arg(3)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BlurReference)->Arg(1)->Arg(3)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
