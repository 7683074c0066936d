#pragma once

#include "maskvct/common.hpp"
#include "maskvct/params.hpp"
#include "maskvct/rng.hpp"
#include "maskvct/token_grid.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace maskvct {

/// F0 per frame in Hz; 0 marks an unvoiced frame.
struct PitchContour {
  std::vector<double> f0_hz;
  double frame_rate_hz = 50.0;

  int frames() const { return static_cast<int>(f0_hz.size()); }
  /// Throws DomainError on negative or non-finite entries.
  void validate() const;
};

enum class LinguisticMode { discrete, continuous };

/// Linguistic content at its source rate (syllable segments, ~8.33 Hz).
struct LinguisticSequence {
  LinguisticMode mode = LinguisticMode::discrete;
  std::vector<int> tokens;          // discrete mode
  Mat vectors;                      // continuous mode: segments x D
  std::vector<double> frame_times;  // segment start times in seconds
  int vocab_size = 0;               // discrete mode

  int segments() const;
  void validate() const;
};

/// Linguistic content held per output frame.
struct AlignedLinguistic {
  LinguisticMode mode = LinguisticMode::discrete;
  std::vector<int> tokens;
  Mat vectors;

  int frames() const;
};

struct DropFlags {
  bool speaker = false;
  bool ling = false;
  bool pitch = false;

  bool operator==(const DropFlags&) const = default;
};

/// The four training/guidance configurations.
enum class DropMode { all = 0, spk = 1, ling = 2, null = 3 };

DropFlags drop_flags_for(DropMode mode);
std::string_view to_string(DropMode mode);

inline constexpr std::array<double, 4> kDefaultDropRatios = {6.0 / 11, 2.0 / 11, 2.0 / 11,
                                                             1.0 / 11};

/// Draws one of all/spk/ling/null with probabilities proportional to `ratios`.
DropMode sample_drop_mode(Rng& rng, std::span<const double, 4> ratios = kDefaultDropRatios);
DropFlags sample_condition_drop(Rng& rng);

/// Source and prompt conditions for one utterance. The prompt carries its own
/// linguistic and pitch frames, which are prefixed together with its tokens.
struct ConditionBundle {
  TokenGrid prompt;
  LinguisticSequence prompt_ling;
  std::optional<PitchContour> prompt_pitch;
  LinguisticSequence ling;
  std::optional<PitchContour> pitch;
  DropFlags drop;
};

/// Sinusoidal embedding of log(1 + f): sine block then cosine block.
Vec pitch_embedding(double f_hz, int d);
Mat embed_pitch_contour(const PitchContour& contour, int d);

/// Step-function hold: frame t takes the latest segment starting at or
/// before t / target_rate.
AlignedLinguistic upsample_linguistic(const LinguisticSequence& seq, int target_frames,
                                      double target_rate_hz = 50.0);

/// Zeroes floor(fraction * d) distinct channels across all frames. Returns the
/// zeroed channel indices in ascending order.
std::vector<int> spec_augment_channels(Mat& x, double fraction, Rng& rng);

/// Sizes of the learned input tables.
struct EmbeddingShape {
  int codebooks = 3;
  int vocab = 16;
  int ling_vocab = 8;
  int ling_dim = 16;
  int d_model = 64;
};

/// Registers the learned embedding parameters ("embed.*", "ling_proj.*").
void add_embedding_params(ParamStore& params, const EmbeddingShape& shape);

/// Sums per frame the C codebook embeddings (the sentinel selects each
/// layer's mask embedding), the linguistic embedding and the pitch embedding.
/// Dropped conditions contribute their mask embeddings; a dropped speaker
/// masks the whole prompt. Prompt frames come first.
Mat assemble_input(const ConditionBundle& bundle, const MaskedGrid& acoustic,
                   const ParamStore& params, const EmbeddingShape& shape);

/// Accumulates into `grads` the gradient of a loss with respect to the
/// embedding parameters given its gradient `d_input` w.r.t. assemble_input's output.
void assemble_input_backward(const ConditionBundle& bundle, const MaskedGrid& acoustic,
                             const ParamStore& params, const EmbeddingShape& shape,
                             const Mat& d_input, ParamStore& grads);

}  // namespace maskvct
