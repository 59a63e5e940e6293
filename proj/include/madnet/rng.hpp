#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace madnet {

/// Deterministic random source. The engine is std::mt19937_64, whose raw
/// output sequence is fixed by the standard; all conversions to reals are
/// done here rather than through std distributions, which are
/// implementation-defined.
///
/// One instance per worker. Parallel code derives worker streams with
/// `derive(workerIndex)`, i.e. seed = masterSeed + workerIndex.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  SeededRng derive(std::uint64_t workerIndex) const { return SeededRng(seed_ + workerIndex); }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool hasSpare_ = false;
  double spare_ = 0.0;
};

}  // namespace madnet
