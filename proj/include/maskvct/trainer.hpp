#pragma once

#include "maskvct/conditioning.hpp"
#include "maskvct/model.hpp"
#include "maskvct/net.hpp"
#include "maskvct/params.hpp"
#include "maskvct/schedules.hpp"
#include "maskvct/token_grid.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace maskvct {

/// One utterance with both linguistic views and a speaker prompt.
struct TrainingExample {
  TokenGrid target;
  LinguisticSequence ling_discrete;
  LinguisticSequence ling_continuous;
  PitchContour pitch;
  TokenGrid prompt;
  LinguisticSequence prompt_ling_discrete;
  LinguisticSequence prompt_ling_continuous;
  PitchContour prompt_pitch;

  /// Bundle using the continuous or discrete linguistic view.
  ConditionBundle bundle(bool continuous, DropFlags drop = {}) const;
};

struct TrainConfig {
  int batch_size = 16;
  int steps = 2000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::array<double, 4> drop_ratios = kDefaultDropRatios;
  double continuous_ling_prob = 0.5;
  double spec_augment_fraction = 0.1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Per-sample gradients are computed by this many workers and reduced in
  /// sample order, so the result does not depend on it.
  int threads = 1;

  void validate() const;
};

struct MaskedLoss {
  double loss = 0.0;
  int count = 0;
};

/// Mean negative log-likelihood over the target-layer masked positions.
MaskedLoss masked_loss(const LogitTensor& logits, const TokenGrid& targets,
                       const LayeredMask& mask);

/// Gradient of masked_loss with respect to the logits (zero off the masked set).
LogitTensor masked_loss_gradient(const LogitTensor& logits, const TokenGrid& targets,
                                 const LayeredMask& mask);

/// Decoupled-weight-decay Adam. Decay skips row vectors (biases, gains, masks).
class AdamW {
 public:
  AdamW(const ParamStore& like, const TrainConfig& cfg);
  void step(ParamStore& params, const ParamStore& grads);
  long iterations() const { return t_; }

 private:
  ParamStore m_;
  ParamStore v_;
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Random choices made for one sample of a training step.
struct SampleDraw {
  MaskingDraw mask;
  DropMode drop = DropMode::all;
  bool continuous = false;
  std::vector<int> augmented_channels;
};

struct StepResult {
  double loss = 0.0;
  std::vector<SampleDraw> draws;
};

/// Mean masked loss and its parameter gradient for a batch, using the
/// per-sample random streams keyed by (seed, step, sample index).
StepResult batch_gradient(const CodecModel& model, std::span<const TrainingExample> batch,
                          const TrainConfig& cfg, std::uint64_t step, ParamStore& grads);

/// One optimizer update on `batch`.
StepResult train_step(CodecModel& model, AdamW& optimizer, std::span<const TrainingExample> batch,
                      const TrainConfig& cfg, std::uint64_t step);

}  // namespace maskvct
