#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace maskvct {

/// Seeded random stream. All draws are derived from raw 64-bit engine output
/// so sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent substream for a (seed, key...) tuple. Used to give each
  /// sample/step/frame its own stream so parallel execution stays reproducible.
  static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Uniform integer on [0, n).
  int uniform_int(int n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  /// Standard Gumbel(0, 1) variate.
  double gumbel();
  /// Index drawn proportionally to non-negative weights.
  int categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace maskvct
