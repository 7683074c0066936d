#include "maskvct/rng.hpp"

#include "maskvct/common.hpp"

#include <cmath>
#include <numbers>

namespace maskvct {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

Rng Rng::keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : key) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw DomainError("uniform_int: n must be positive");
  const auto range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % range);
}

double Rng::normal() {
  // Box-Muller, one variate per call.
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gumbel() { return -std::log(-std::log(uniform_open())); }

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw DomainError("categorical: weights must have positive mass");
  const double r = uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = static_cast<int>(i);
    if (r < acc) return last_positive;
  }
  return last_positive;
}

}  // namespace maskvct
