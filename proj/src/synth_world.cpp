#include "maskvct/synth_world.hpp"

#include <cmath>
#include <numeric>

namespace maskvct {

void WorldSpec::validate() const {
  if (vocab < 2 || codebooks < 1 || ling_vocab < 1 || n_speakers < 1 || pitch_buckets < 1 ||
      ling_dim < 1)
    throw ConfigError("WorldSpec: sizes must be positive (vocab >= 2)");
  if (source_frames < 1 || prompt_frames < 1) throw ConfigError("WorldSpec: frame counts must be >= 1");
  if (!(ling_noise >= 0.0)) throw ConfigError("WorldSpec: ling_noise must be >= 0");
}

SynthWorld::SynthWorld(WorldSpec spec) : spec_(spec) {
  spec_.validate();
  Rng rng = Rng::keyed(spec_.seed, {0x77'6f'72'6c'64ULL});
  // Mixers are units mod K so every condition value maps to a distinct offset.
  std::vector<int> units;
  for (int x = 1; x < spec_.vocab; ++x)
    if (std::gcd(x, spec_.vocab) == 1) units.push_back(x);
  auto draw = [&] { return units[rng.uniform_int(static_cast<int>(units.size()))]; };
  for (int c = 0; c < spec_.codebooks; ++c) {
    a_.push_back(draw());
    b_.push_back(draw());
    d_.push_back(draw());
  }
  ling_embedding_.resize(spec_.ling_vocab, spec_.ling_dim);
  for (Eigen::Index i = 0; i < ling_embedding_.size(); ++i) ling_embedding_.data()[i] = rng.normal();
}

int SynthWorld::token(int layer, int ling, int speaker, int pitch_bucket) const {
  const long v = static_cast<long>(a_[layer]) * ling + static_cast<long>(b_[layer]) * speaker +
                 static_cast<long>(d_[layer]) * pitch_bucket + layer;
  return static_cast<int>(((v % spec_.vocab) + spec_.vocab) % spec_.vocab);
}

int SynthWorld::pitch_bucket(double f0_hz) const {
  const double lo = std::log(kMinPitchHz);
  const double hi = std::log(kMaxPitchHz);
  const double x = std::log(1.0 + f0_hz);
  const int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * spec_.pitch_buckets));
  return std::clamp(b, 0, spec_.pitch_buckets - 1);
}

double SynthWorld::bucket_center_hz(int bucket) const {
  const double lo = std::log(kMinPitchHz);
  const double hi = std::log(kMaxPitchHz);
  return std::exp(lo + (bucket + 0.5) * (hi - lo) / spec_.pitch_buckets) - 1.0;
}

LinguisticSequence SynthWorld::draw_linguistic(int frames, Rng& rng) const {
  LinguisticSequence seq;
  seq.mode = LinguisticMode::discrete;
  seq.vocab_size = spec_.ling_vocab;
  const int segments = (frames + kFramesPerSegment - 1) / kFramesPerSegment;
  for (int i = 0; i < segments; ++i) {
    seq.tokens.push_back(rng.uniform_int(spec_.ling_vocab));
    seq.frame_times.push_back(i * kFramesPerSegment / kFrameRateHz);
  }
  return seq;
}

LinguisticSequence SynthWorld::continuous_view(const LinguisticSequence& discrete, Rng& rng) const {
  LinguisticSequence seq;
  seq.mode = LinguisticMode::continuous;
  seq.frame_times = discrete.frame_times;
  seq.vectors.resize(discrete.segments(), spec_.ling_dim);
  for (int i = 0; i < discrete.segments(); ++i) {
    seq.vectors.row(i) = ling_embedding_.row(discrete.tokens[i]);
    for (int j = 0; j < spec_.ling_dim; ++j) seq.vectors(i, j) += spec_.ling_noise * rng.normal();
  }
  return seq;
}

PitchContour SynthWorld::draw_pitch(int frames, Rng& rng) const {
  PitchContour contour;
  contour.frame_rate_hz = kFrameRateHz;
  const double lo = std::log(kMinPitchHz);
  const double hi = std::log(kMaxPitchHz);
  while (contour.frames() < frames) {
    const int length = 4 + rng.uniform_int(13);
    double f0 = 0.0;
    if (!rng.bernoulli(0.1)) f0 = std::exp(lo + rng.uniform() * (hi - lo)) - 1.0;
    for (int i = 0; i < length && contour.frames() < frames; ++i) contour.f0_hz.push_back(f0);
  }
  return contour;
}

TokenGrid SynthWorld::render(const LinguisticSequence& ling, const PitchContour& pitch,
                             int speaker) const {
  const int frames = pitch.frames();
  const auto aligned = upsample_linguistic(ling, frames, kFrameRateHz);
  TokenGrid grid(frames, spec_.codebooks, spec_.vocab, kFrameRateHz);
  for (int t = 0; t < frames; ++t) {
    const int bucket = pitch_bucket(pitch.f0_hz[t]);
    for (int c = 0; c < spec_.codebooks; ++c) grid.set(t, c, token(c, aligned.tokens[t], speaker, bucket));
  }
  return grid;
}

SynthSample SynthWorld::build(Rng& rng, int speaker) const {
  SynthSample s;
  s.speaker = speaker;
  TrainingExample& ex = s.example;
  ex.ling_discrete = draw_linguistic(spec_.source_frames, rng);
  ex.pitch = draw_pitch(spec_.source_frames, rng);
  ex.target = render(ex.ling_discrete, ex.pitch, speaker);
  ex.ling_continuous = continuous_view(ex.ling_discrete, rng);
  ex.prompt_ling_discrete = draw_linguistic(spec_.prompt_frames, rng);
  ex.prompt_pitch = draw_pitch(spec_.prompt_frames, rng);
  ex.prompt = render(ex.prompt_ling_discrete, ex.prompt_pitch, speaker);
  ex.prompt_ling_continuous = continuous_view(ex.prompt_ling_discrete, rng);
  return s;
}

SynthSample SynthWorld::generate_sample(Rng& rng) const {
  const int speaker = rng.uniform_int(spec_.n_speakers);
  return build(rng, speaker);
}

SynthSample SynthWorld::sample(std::uint64_t index) const {
  Rng rng = Rng::keyed(spec_.seed, {index});
  return generate_sample(rng);
}

SynthSample SynthWorld::sample_with_speaker(std::uint64_t index, int speaker) const {
  if (speaker < 0 || speaker >= spec_.n_speakers) throw DomainError("sample_with_speaker: bad speaker");
  Rng rng = Rng::keyed(spec_.seed, {index});
  rng.uniform_int(spec_.n_speakers);  // keep the stream aligned with sample()
  return build(rng, speaker);
}

}  // namespace maskvct
