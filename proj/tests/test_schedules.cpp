#include "maskvct/common.hpp"
#include "maskvct/schedules.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace maskvct;

TEST_CASE("keep_probability endpoints and midpoint") {
  CHECK(keep_probability(0.0) == 1.0);
  CHECK(keep_probability(1.0) == 0.0);
  CHECK(keep_probability(0.5) == doctest::Approx(0.7071067811865476).epsilon(1e-12));
  CHECK_THROWS_AS(keep_probability(-0.01), DomainError);
  CHECK_THROWS_AS(keep_probability(1.01), DomainError);
}

TEST_CASE("keep_probability is non-increasing") {
  double prev = keep_probability(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double p = keep_probability(i / 1000.0);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("layer_distribution values") {
  const auto p2 = layer_distribution(2);
  CHECK(p2[0] == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(p2[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  const auto p9 = layer_distribution(9);
  CHECK(p9[0] == doctest::Approx(88.0 / 90 / 8).epsilon(1e-14));
  CHECK(p9[8] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_THROWS_AS(layer_distribution(1), DomainError);
}

TEST_CASE("layer_distribution is a strictly decreasing probability vector for C in [2,16]") {
  for (int C = 2; C <= 16; ++C) {
    const auto p = layer_distribution(C);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
    for (int c = 0; c < C; ++c) CHECK(p[c] > 0.0);
    for (int c = 1; c < C; ++c) CHECK(p[c] < p[c - 1]);
  }
}

TEST_CASE("unmask_counts examples") {
  CHECK(unmask_counts(0, 5) == std::vector<int>(5, 0));
  CHECK(unmask_counts(10, 1) == std::vector<int>{10});
  CHECK(unmask_counts(100, 4) == std::vector<int>{8, 22, 32, 38});
  CHECK_THROWS_AS(unmask_counts(-1, 2), DomainError);
  CHECK_THROWS_AS(unmask_counts(3, 0), DomainError);
}

TEST_CASE("unmask_counts sums exactly and follows the floor-of-cosine rule") {
  for (int total = 0; total <= 200; total += 7) {
    for (int S = 1; S <= 64; ++S) {
      const auto counts = unmask_counts(total, S);
      REQUIRE(counts.size() == static_cast<std::size_t>(S));
      int remaining = total;
      for (int s = 0; s < S; ++s) {
        CHECK(counts[s] >= 0);
        remaining -= counts[s];
        const int expected = s + 1 < S ? static_cast<int>(std::floor(
                                             total * std::cos(std::numbers::pi / 2 * (s + 1) / S)))
                                       : 0;
        CHECK(remaining == expected);
      }
    }
  }
}

TEST_CASE("draw_training_mask is deterministic per seed") {
  Rng a(99), b(99);
  CHECK(draw_training_mask(20, 4, a) == draw_training_mask(20, 4, b));
}

TEST_CASE("draw_training_mask Monte Carlo laws") {
  Rng rng(2024);
  const int draws = 100000;
  double sum_u = 0.0;
  long layer8 = 0;
  // Per-draw deviation of the zero fraction from 1 - keep(u).
  double dev_sum = 0.0, dev_sq = 0.0;
  const int T = 8;
  for (int i = 0; i < draws; ++i) {
    const MaskingDraw d = draw_training_mask(T, 9, rng);
    sum_u += d.u;
    layer8 += d.target_layer == 8;
    const int zeros = static_cast<int>(std::count(d.keep_row.begin(), d.keep_row.end(), 0));
    const double dev = static_cast<double>(zeros) / T - (1.0 - keep_probability(d.u));
    dev_sum += dev;
    dev_sq += dev * dev;
  }
  CHECK(std::abs(sum_u / draws - 0.5) < 0.01);
  CHECK(std::abs(static_cast<double>(layer8) / draws - 0.1) < 0.005);
  const double mean_dev = dev_sum / draws;
  const double se = std::sqrt((dev_sq / draws - mean_dev * mean_dev) / draws);
  CHECK(std::abs(mean_dev) < 3.0 * se);
}

TEST_CASE("StepBudget validation and defaults") {
  const auto nine = StepBudget::default_for(9);
  CHECK(nine.steps_per_layer() == std::vector<int>{40, 16, 2, 1, 1, 1, 1, 1, 1});
  CHECK(nine.total() == 64);
  CHECK_THROWS_AS(StepBudget({3, 0}), ConfigError);
  CHECK_THROWS_AS(StepBudget(std::vector<int>{}), ConfigError);
}
