#pragma once

#include "maskvct/rng.hpp"
#include "maskvct/trainer.hpp"

#include <cstdint>
#include <vector>

namespace maskvct {

struct WorldSpec {
  int vocab = 16;
  int codebooks = 3;
  int ling_vocab = 8;
  int n_speakers = 8;
  int pitch_buckets = 4;
  int ling_dim = 16;
  /// Std of the Gaussian noise added to continuous linguistic vectors.
  double ling_noise = 0.1;
  int source_frames = 32;
  int prompt_frames = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthSample {
  TrainingExample example;
  int speaker = 0;
};

/// Toy codec universe: the token at frame t, layer c is
/// (a_c ling(t) + b_c speaker + d_c pitch_bucket(t) + c) mod K.
class SynthWorld {
 public:
  /// Frames per linguistic segment (50 Hz / 8.33 Hz).
  static constexpr int kFramesPerSegment = 6;
  static constexpr double kFrameRateHz = 50.0;
  static constexpr double kMinPitchHz = 51.0;
  static constexpr double kMaxPitchHz = 401.0;

  explicit SynthWorld(WorldSpec spec);

  const WorldSpec& spec() const { return spec_; }

  SynthSample generate_sample(Rng& rng) const;
  /// Sample keyed by (world seed, index).
  SynthSample sample(std::uint64_t index) const;
  /// Same as sample() with a chosen speaker.
  SynthSample sample_with_speaker(std::uint64_t index, int speaker) const;

  int token(int layer, int ling, int speaker, int pitch_bucket) const;
  /// Uniform buckets of log(1 + f) over [log 51, log 401], clamped at the ends.
  int pitch_bucket(double f0_hz) const;
  /// Geometric center of a bucket in Hz.
  double bucket_center_hz(int bucket) const;

  /// Discrete linguistic tokens at 8.33 Hz covering `frames` frames.
  LinguisticSequence draw_linguistic(int frames, Rng& rng) const;
  /// Continuous view: fixed per-token embedding plus Gaussian noise.
  LinguisticSequence continuous_view(const LinguisticSequence& discrete, Rng& rng) const;
  /// Piecewise-constant contour; about one segment in ten is unvoiced.
  PitchContour draw_pitch(int frames, Rng& rng) const;
  TokenGrid render(const LinguisticSequence& ling, const PitchContour& pitch, int speaker) const;

  const std::vector<int>& ling_mixers() const { return a_; }
  const std::vector<int>& speaker_mixers() const { return b_; }
  const std::vector<int>& pitch_mixers() const { return d_; }

 private:
  SynthSample build(Rng& rng, int speaker) const;

  WorldSpec spec_;
  std::vector<int> a_, b_, d_;
  Mat ling_embedding_;  // ling_vocab x ling_dim
};

}  // namespace maskvct
