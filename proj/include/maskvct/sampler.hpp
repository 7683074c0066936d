#pragma once

#include "maskvct/conditioning.hpp"
#include "maskvct/guidance.hpp"
#include "maskvct/model.hpp"
#include "maskvct/rng.hpp"
#include "maskvct/schedules.hpp"
#include "maskvct/token_grid.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace maskvct {

struct SamplerConfig {
  StepBudget step_budget = StepBudget::default_for(9);
  int top_k = 35;
  double top_p = 0.9;
  std::uint64_t seed = 0;
  GuidanceWeights weights = kAllModeWeights;
  bool pitch_conditioned = true;
  /// Worker threads for the guidance passes; results do not depend on it.
  int threads = 1;

  /// Throws ConfigError on invalid sampling parameters or a budget that does
  /// not cover `codebooks` layers.
  void validate(int codebooks) const;
};

/// Adds independent Gumbel noise to each confidence and returns the indices of
/// the `count` largest perturbed values, ascending. When `count` covers every
/// entry no noise is drawn.
std::vector<int> select_positions(std::span<const double> confidences, int count, Rng& rng);

/// Probabilities after keeping the top_k classes and then the smallest
/// descending prefix with cumulative mass >= top_p; zero elsewhere.
Vec truncated_probabilities(const Vec& logits, int top_k, double top_p);

int sample_token(const Vec& logits, int top_k, double top_p, Rng& rng);

/// Called after every sampler step with (layer, step, state).
using StepObserver = std::function<void(int, int, const MaskedGrid&)>;

/// Evaluates the passes required by `weights` and combines them.
LogitTensor guided_logits(const ConditionalModel& model, const ConditionBundle& bundle,
                          const MaskedGrid& state, const SamplerConfig& cfg);

/// Iterative unmasking from an all-masked grid, one codebook layer per stage.
TokenGrid generate(const ConditionBundle& bundle, int frames, const SamplerConfig& cfg,
                   const ConditionalModel& model, const StepObserver& observer = {});

}  // namespace maskvct
