#pragma once

#include "maskvct/conditioning.hpp"
#include "maskvct/guidance.hpp"
#include "maskvct/model.hpp"
#include "maskvct/sampler.hpp"
#include "maskvct/synth_world.hpp"
#include "maskvct/token_grid.hpp"
#include "maskvct/trainer.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace maskvct {

struct FpcReport {
  double fpc = 0.0;
  int voiced_frames_used = 0;
};

/// Pearson correlation of log(1 + f) over frames voiced in both contours.
/// Throws UndefinedMetricError with fewer than two such frames or zero variance.
FpcReport fpc(const PitchContour& a, const PitchContour& b);

/// Exact distribution over states, keyed by the frame-major token vector
/// (sentinel K for masked entries) together with the target layer.
using StateKey = std::pair<int, std::vector<int>>;
using StateDistribution = std::map<StateKey, double>;

StateKey state_key(const MaskedGrid& state);

/// Enumerates every (proposal, selection) outcome of one sampler step on
/// `layer` that unmasks `count` positions. Refuses instances with T * K > 64.
std::vector<std::pair<MaskedGrid, double>> brute_force_step_oracle(
    const ConditionalModel& model, const ConditionBundle& bundle, const MaskedGrid& state,
    const SamplerConfig& cfg, int layer, int count);

/// Composes the step oracle over the whole schedule: exact distribution of
/// generate()'s output grid (key: frame-major tokens).
std::map<std::vector<int>, double> exact_output_distribution(const ConditionalModel& model,
                                                             const ConditionBundle& bundle,
                                                             int frames, const SamplerConfig& cfg);

double total_variation(const std::map<std::vector<int>, double>& p,
                       const std::map<std::vector<int>, double>& q);

struct AccuracyReport {
  long correct = 0;
  long total = 0;
  double accuracy() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

/// Top-1 accuracy on target-layer masked positions under training-style mask
/// draws keyed by (seed, example index), with the given conditioning.
AccuracyReport masked_accuracy(const CodecModel& model, std::span<const TrainingExample> examples,
                               std::uint64_t seed, DropMode mode, bool continuous);

struct ProbeSetting {
  std::string name;
  GuidanceWeights weights;
  bool pitch_conditioned = true;
  bool continuous = false;
};

struct ProbeResult {
  ProbeSetting setting;
  int generations = 0;
  long tokens = 0;
  long speaker_consistent = 0;
  long ling_consistent = 0;
  /// Per-generation rates and FPC (0 where the metric is undefined).
  std::vector<double> speaker_rates;
  std::vector<double> ling_rates;
  std::vector<double> fpc_values;
  int fpc_defined = 0;

  double speaker_rate() const;
  double ling_rate() const;
  double mean_fpc() const;
};

/// A token is speaker-consistent when some pitch bucket explains it given the
/// source linguistic token and the prompt speaker, and linguistic-consistent
/// when some speaker explains it given the source pitch bucket. The pitch
/// contour of a generation is decoded per frame as the bucket explaining the
/// most layers (unvoiced when none does).
struct ProbeOptions {
  int generations = 500;
  std::uint64_t seed = 0;
  /// Sample indices start here so probes stay disjoint from training data.
  std::uint64_t first_index = 1'000'000;
  StepBudget step_budget = StepBudget::default_for(3);
  int top_k = 35;
  double top_p = 0.9;
  int threads = 1;
};

std::vector<ProbeResult> cfg_probe(const CodecModel& model, const SynthWorld& world,
                                   std::span<const ProbeSetting> settings,
                                   const ProbeOptions& options);

/// CSV with header
/// setting,w_all,w_spk,w_ling,pitch,continuous,generations,tokens,speaker_rate,ling_rate,mean_fpc,fpc_defined
std::string probe_csv(std::span<const ProbeResult> results);

PitchContour decode_pitch(const SynthWorld& world, const TokenGrid& grid,
                          const LinguisticSequence& ling, int speaker);

namespace stats {

/// Upper-tail p-value of Pearson's chi-square statistic.
double chi_square_pvalue(std::span<const long> observed, std::span<const double> expected_probs);

/// One-sided Welch test p-value for mean(a) > mean(b).
double welch_greater_pvalue(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);

}  // namespace stats

}  // namespace maskvct
