#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace modeiv {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named sub-stream of `seed`. Same inputs give the same output on
/// every platform.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distributions are implemented here rather than taken from
/// <random>, whose distribution algorithms are implementation-defined, so
/// draws are bitwise reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream)
      : engine_(derive_seed(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via the Marsaglia polar method.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Uniform integer in [0, n), unbiased (rejection sampling).
  std::uint64_t index(std::uint64_t n);

  /// Fisher-Yates shuffle driven by index().
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace modeiv
