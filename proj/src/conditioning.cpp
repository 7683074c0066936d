#include "maskvct/conditioning.hpp"

#include "maskvct/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace maskvct {

void PitchContour::validate() const {
  if (!(frame_rate_hz > 0.0)) throw DomainError("PitchContour: frame rate must be positive");
  for (double f : f0_hz)
    if (!(f >= 0.0) || !std::isfinite(f))
      throw DomainError("PitchContour: f0 values must be finite and >= 0");
}

int LinguisticSequence::segments() const {
  return mode == LinguisticMode::discrete ? static_cast<int>(tokens.size())
                                          : static_cast<int>(vectors.rows());
}

void LinguisticSequence::validate() const {
  if (mode == LinguisticMode::discrete) {
    if (vectors.size() != 0) throw FormatError("LinguisticSequence: discrete mode carries vectors");
    for (int t : tokens)
      if (t < 0 || t >= vocab_size) throw FormatError("LinguisticSequence: token out of range");
  } else {
    if (!tokens.empty()) throw FormatError("LinguisticSequence: continuous mode carries tokens");
    if (!vectors.allFinite()) throw FormatError("LinguisticSequence: non-finite vector entry");
  }
  if (frame_times.size() != static_cast<std::size_t>(segments()))
    throw DimensionError("LinguisticSequence: frame_times length must equal segment count");
  for (std::size_t i = 1; i < frame_times.size(); ++i)
    if (!(frame_times[i] > frame_times[i - 1]))
      throw DomainError("LinguisticSequence: frame_times must increase strictly");
}

int AlignedLinguistic::frames() const {
  return mode == LinguisticMode::discrete ? static_cast<int>(tokens.size())
                                          : static_cast<int>(vectors.rows());
}

DropFlags drop_flags_for(DropMode mode) {
  switch (mode) {
    case DropMode::all: return {false, false, false};
    case DropMode::spk: return {false, false, true};
    case DropMode::ling: return {true, false, true};
    case DropMode::null: return {true, true, true};
  }
  return {};
}

std::string_view to_string(DropMode mode) {
  switch (mode) {
    case DropMode::all: return "all";
    case DropMode::spk: return "spk";
    case DropMode::ling: return "ling";
    case DropMode::null: return "null";
  }
  return "?";
}

DropMode sample_drop_mode(Rng& rng, std::span<const double, 4> ratios) {
  return static_cast<DropMode>(rng.categorical(ratios));
}

DropFlags sample_condition_drop(Rng& rng) { return drop_flags_for(sample_drop_mode(rng)); }

Vec pitch_embedding(double f_hz, int d) {
  if (!(f_hz >= 0.0)) throw DomainError("pitch_embedding: f must be >= 0");
  if (d <= 0 || d % 2 != 0) throw DomainError("pitch_embedding: d must be even and positive");
  const double x = std::log(1.0 + f_hz);
  const int half = d / 2;
  Vec out(d);
  for (int i = 0; i < half; ++i) {
    const double arg = x / std::pow(10000.0, 2.0 * i / d);
    out(i) = std::sin(arg);
    out(i + half) = std::cos(arg);
  }
  return out;
}

Mat embed_pitch_contour(const PitchContour& contour, int d) {
  contour.validate();
  Mat out(contour.frames(), d);
  for (int t = 0; t < contour.frames(); ++t) out.row(t) = pitch_embedding(contour.f0_hz[t], d).transpose();
  return out;
}

AlignedLinguistic upsample_linguistic(const LinguisticSequence& seq, int target_frames,
                                      double target_rate_hz) {
  if (seq.segments() == 0) throw DomainError("upsample_linguistic: empty sequence");
  if (target_frames < 0) throw DomainError("upsample_linguistic: negative frame count");
  seq.validate();
  AlignedLinguistic out;
  out.mode = seq.mode;
  std::vector<int> source(target_frames);
  std::size_t seg = 0;
  for (int t = 0; t < target_frames; ++t) {
    const double time = t / target_rate_hz;
    // A relative tolerance keeps boundaries such as 6 / 50 == 0.12 exact.
    while (seg + 1 < seq.frame_times.size() && seq.frame_times[seg + 1] <= time * (1 + 1e-12))
      ++seg;
    source[t] = static_cast<int>(seg);
  }
  if (seq.mode == LinguisticMode::discrete) {
    out.tokens.resize(target_frames);
    for (int t = 0; t < target_frames; ++t) out.tokens[t] = seq.tokens[source[t]];
  } else {
    out.vectors.resize(target_frames, seq.vectors.cols());
    for (int t = 0; t < target_frames; ++t) out.vectors.row(t) = seq.vectors.row(source[t]);
  }
  return out;
}

std::vector<int> spec_augment_channels(Mat& x, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw DomainError("spec_augment_channels: fraction must lie in [0, 1]");
  const int d = static_cast<int>(x.cols());
  const int count = static_cast<int>(std::floor(fraction * d + 1e-9));
  // Partial Fisher-Yates over channel indices.
  std::vector<int> channels(d);
  std::iota(channels.begin(), channels.end(), 0);
  for (int i = 0; i < count; ++i) std::swap(channels[i], channels[i + rng.uniform_int(d - i)]);
  channels.resize(count);
  std::sort(channels.begin(), channels.end());
  for (int ch : channels) x.col(ch).setZero();
  return channels;
}

namespace {

std::string acoustic_name(int c) { return "embed.acoustic." + std::to_string(c); }

struct ProjectionCache {
  Mat pre_relu;
  Mat hidden;
  ops::LayerNormCache ln;
  Mat normalized;
};

Mat project_continuous(const Mat& vectors, const ParamStore& p, ProjectionCache* cache) {
  Mat pre = vectors * p.get("ling_proj.w1");
  pre.rowwise() += p.get("ling_proj.b1").row(0);
  Mat hidden = pre.cwiseMax(0.0);
  ops::LayerNormCache ln;
  Mat normalized = ops::layer_norm(hidden, p.get("ling_proj.ln_gain"), p.get("ling_proj.ln_bias"), &ln);
  Mat out = normalized * p.get("ling_proj.w2");
  out.rowwise() += p.get("ling_proj.b2").row(0);
  if (cache != nullptr) {
    cache->pre_relu = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->ln = std::move(ln);
    cache->normalized = std::move(normalized);
  }
  return out;
}

void project_continuous_backward(const Mat& vectors, const ParamStore& p,
                                 const ProjectionCache& cache, const Mat& d_out,
                                 ParamStore& g) {
  g.get("ling_proj.w2") += cache.normalized.transpose() * d_out;
  g.get("ling_proj.b2").row(0) += d_out.colwise().sum();
  const Mat d_norm = d_out * p.get("ling_proj.w2").transpose();
  Mat d_hidden = ops::layer_norm_backward(d_norm, cache.ln, p.get("ling_proj.ln_gain"),
                                          g.get("ling_proj.ln_gain"), g.get("ling_proj.ln_bias"));
  d_hidden = (cache.pre_relu.array() > 0.0).select(d_hidden, 0.0);
  g.get("ling_proj.w1") += vectors.transpose() * d_hidden;
  g.get("ling_proj.b1").row(0) += d_hidden.colwise().sum();
}

/// One contiguous block of frames (prompt or source) with its conditions.
struct Section {
  int offset = 0;
  int frames = 0;
  std::vector<int> tokens;  // frames x C, sentinel K where hidden
  std::optional<AlignedLinguistic> ling;
  const PitchContour* pitch = nullptr;
};

std::vector<Section> make_sections(const ConditionBundle& b, const MaskedGrid& acoustic,
                                   const EmbeddingShape& shape) {
  const int C = shape.codebooks;
  const int K = shape.vocab;
  if (acoustic.codebooks() != C || acoustic.vocab_size() != K)
    throw DimensionError("assemble_input: acoustic grid does not match embedding shape");
  if (b.prompt.codebooks() != C || b.prompt.vocab_size() != K)
    throw DimensionError("assemble_input: prompt grid does not match embedding shape");
  const int tp = b.prompt.frames();
  const int ts = acoustic.frames();

  Section prompt;
  prompt.offset = 0;
  prompt.frames = tp;
  if (b.drop.speaker) {
    prompt.tokens.assign(static_cast<std::size_t>(tp) * C, K);
  } else {
    prompt.tokens = b.prompt.data();
    if (!b.drop.ling && b.prompt_ling.segments() > 0)
      prompt.ling = upsample_linguistic(b.prompt_ling, tp);
    if (!b.drop.pitch && b.prompt_pitch) {
      if (b.prompt_pitch->frames() != tp)
        throw DimensionError("assemble_input: prompt pitch length differs from prompt frames");
      prompt.pitch = &*b.prompt_pitch;
    }
  }

  Section source;
  source.offset = tp;
  source.frames = ts;
  source.tokens = acoustic.data();
  if (!b.drop.ling) source.ling = upsample_linguistic(b.ling, ts);
  if (b.pitch && b.pitch->frames() != ts)
    throw DimensionError("assemble_input: pitch length differs from source frames");
  if (!b.drop.pitch && b.pitch) source.pitch = &*b.pitch;

  for (const Section* s : {&prompt, &source})
    if (s->ling && s->ling->mode == LinguisticMode::continuous &&
        s->ling->vectors.cols() != shape.ling_dim)
      throw DimensionError("assemble_input: continuous linguistic dimension mismatch");
  return {std::move(prompt), std::move(source)};
}

}  // namespace

void add_embedding_params(ParamStore& params, const EmbeddingShape& s) {
  for (int c = 0; c < s.codebooks; ++c) params.add(acoustic_name(c), s.vocab + 1, s.d_model);
  params.add("embed.ling", s.ling_vocab, s.d_model);
  params.add("embed.ling_mask", 1, s.d_model);
  params.add("embed.pitch_mask", 1, s.d_model);
  params.add("ling_proj.w1", s.ling_dim, s.d_model);
  params.add("ling_proj.b1", 1, s.d_model);
  params.add("ling_proj.ln_gain", 1, s.d_model).setOnes();
  params.add("ling_proj.ln_bias", 1, s.d_model);
  params.add("ling_proj.w2", s.d_model, s.d_model);
  params.add("ling_proj.b2", 1, s.d_model);
}

Mat assemble_input(const ConditionBundle& bundle, const MaskedGrid& acoustic,
                   const ParamStore& params, const EmbeddingShape& shape) {
  const int C = shape.codebooks;
  const int d = shape.d_model;
  const auto sections = make_sections(bundle, acoustic, shape);
  Mat x = Mat::Zero(sections[0].frames + sections[1].frames, d);

  for (const auto& s : sections) {
    for (int c = 0; c < C; ++c) {
      const Mat& table = params.get(acoustic_name(c));
      for (int t = 0; t < s.frames; ++t)
        x.row(s.offset + t) += table.row(s.tokens[static_cast<std::size_t>(t) * C + c]);
    }
    if (!s.ling) {
      x.middleRows(s.offset, s.frames).rowwise() += params.get("embed.ling_mask").row(0);
    } else if (s.ling->mode == LinguisticMode::discrete) {
      const Mat& table = params.get("embed.ling");
      for (int t = 0; t < s.frames; ++t) {
        const int tok = s.ling->tokens[t];
        if (tok < 0 || tok >= table.rows())
          throw DomainError("assemble_input: linguistic token outside the embedding table");
        x.row(s.offset + t) += table.row(tok);
      }
    } else {
      x.middleRows(s.offset, s.frames) += project_continuous(s.ling->vectors, params, nullptr);
    }
    if (s.pitch == nullptr) {
      x.middleRows(s.offset, s.frames).rowwise() += params.get("embed.pitch_mask").row(0);
    } else {
      x.middleRows(s.offset, s.frames) += embed_pitch_contour(*s.pitch, d);
    }
  }
  return x;
}

void assemble_input_backward(const ConditionBundle& bundle, const MaskedGrid& acoustic,
                             const ParamStore& params, const EmbeddingShape& shape,
                             const Mat& d_input, ParamStore& grads) {
  const int C = shape.codebooks;
  const auto sections = make_sections(bundle, acoustic, shape);
  if (d_input.rows() != sections[0].frames + sections[1].frames || d_input.cols() != shape.d_model)
    throw DimensionError("assemble_input_backward: gradient shape mismatch");

  for (const auto& s : sections) {
    const auto rows = d_input.middleRows(s.offset, s.frames);
    for (int c = 0; c < C; ++c) {
      Mat& table = grads.get(acoustic_name(c));
      for (int t = 0; t < s.frames; ++t)
        table.row(s.tokens[static_cast<std::size_t>(t) * C + c]) += rows.row(t);
    }
    if (!s.ling) {
      grads.get("embed.ling_mask").row(0) += rows.colwise().sum();
    } else if (s.ling->mode == LinguisticMode::discrete) {
      Mat& table = grads.get("embed.ling");
      for (int t = 0; t < s.frames; ++t) table.row(s.ling->tokens[t]) += rows.row(t);
    } else {
      ProjectionCache cache;
      project_continuous(s.ling->vectors, params, &cache);
      project_continuous_backward(s.ling->vectors, params, cache, rows, grads);
    }
    if (s.pitch == nullptr) grads.get("embed.pitch_mask").row(0) += rows.colwise().sum();
  }
}

}  // namespace maskvct
