#include "maskvct/schedules.hpp"

#include "maskvct/common.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace maskvct {

StepBudget::StepBudget(std::vector<int> steps_per_layer) : steps_(std::move(steps_per_layer)) {
  if (steps_.empty()) throw ConfigError("StepBudget: needs at least one layer");
  for (int s : steps_)
    if (s < 1) throw ConfigError("StepBudget: every layer needs at least one step");
}

StepBudget StepBudget::default_for(int codebooks) {
  if (codebooks < 1) throw ConfigError("StepBudget: codebooks must be positive");
  if (codebooks == 9) return StepBudget({40, 16, 2, 1, 1, 1, 1, 1, 1});
  std::vector<int> steps(codebooks, 1);
  steps[0] = 8;
  if (codebooks > 1) steps[1] = 4;
  return StepBudget(std::move(steps));
}

int StepBudget::total() const { return std::accumulate(steps_.begin(), steps_.end(), 0); }

double keep_probability(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("keep_probability: u must lie in [0, 1]");
  if (u == 1.0) return 0.0;
  return std::cos(std::numbers::pi * u / 2.0);
}

std::vector<double> layer_distribution(int codebooks) {
  if (codebooks < 2) throw DomainError("layer_distribution: C must be >= 2");
  const double c_total = codebooks;
  std::vector<double> p(codebooks);
  for (int c = 0; c < codebooks; ++c) p[c] = 1.0 - 2.0 * (c + 1) / (c_total * (c_total + 1));
  // The unnormalized weights sum to C - 1.
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= sum;
  return p;
}

MaskingDraw draw_training_mask(int frames, int codebooks, Rng& rng) {
  if (frames < 1) throw DomainError("draw_training_mask: T must be >= 1");
  MaskingDraw draw;
  draw.u = rng.uniform();
  const auto p = layer_distribution(codebooks);
  draw.target_layer = rng.categorical(p);
  const double keep = keep_probability(draw.u);
  draw.keep_row.resize(frames);
  for (auto& k : draw.keep_row) k = rng.bernoulli(keep) ? 1 : 0;
  return draw;
}

std::vector<int> unmask_counts(int total_masked, int steps) {
  if (total_masked < 0) throw DomainError("unmask_counts: total must be >= 0");
  if (steps < 1) throw DomainError("unmask_counts: steps must be >= 1");
  std::vector<int> counts(steps);
  int previous = total_masked;
  for (int s = 1; s <= steps; ++s) {
    int remaining = 0;
    if (s < steps) {
      remaining = static_cast<int>(
          std::floor(total_masked * std::cos(std::numbers::pi / 2.0 * s / steps)));
      remaining = std::min(remaining, previous);
    }
    counts[s - 1] = previous - remaining;
    previous = remaining;
  }
  return counts;
}

}  // namespace maskvct
