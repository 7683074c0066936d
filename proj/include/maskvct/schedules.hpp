#pragma once

#include "maskvct/rng.hpp"

#include <cstdint>
#include <vector>

namespace maskvct {

struct MaskingDraw {
  double u = 0.0;
  int target_layer = 0;
  std::vector<std::uint8_t> keep_row;

  bool operator==(const MaskingDraw&) const = default;
};

/// Per-codebook iteration budget of the unmasking sampler.
class StepBudget {
 public:
  StepBudget() = default;
  /// Throws ConfigError unless every entry is >= 1.
  explicit StepBudget(std::vector<int> steps_per_layer);

  /// [40, 16, 2, 1, 1, 1, 1, 1, 1] for nine codebooks; for other C the
  /// first layer gets 8 steps, the second 4 and the rest 1.
  static StepBudget default_for(int codebooks);

  const std::vector<int>& steps_per_layer() const { return steps_; }
  int layers() const { return static_cast<int>(steps_.size()); }
  int total() const;

 private:
  std::vector<int> steps_;
};

/// cos(pi u / 2): probability that a target-layer token stays visible.
double keep_probability(double u);

/// Normalized p(c) proportional to 1 - 2(c+1)/(C(C+1)). Requires C >= 2.
std::vector<double> layer_distribution(int codebooks);

MaskingDraw draw_training_mask(int frames, int codebooks, Rng& rng);

/// Positions to unmask at each of `steps` steps: the masked count remaining
/// after step s is floor(total * cos(pi/2 * s/S)), and zero after the last.
std::vector<int> unmask_counts(int total_masked, int steps);

}  // namespace maskvct
