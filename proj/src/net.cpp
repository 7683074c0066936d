#include "maskvct/net.hpp"

#include <cmath>
#include <string>

namespace maskvct {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kEmbeddingInitStd = 0.5;
constexpr double kRotaryBase = 10000.0;

std::string layer_prefix(int i) { return "layer." + std::to_string(i) + "."; }

// Rotates column pairs (2j, 2j+1) of every head by position * theta_j.
// `sign` = -1 applies the inverse rotation (used in the backward pass).
void apply_rotary(Mat& x, int heads, const Mat& cos_t, const Mat& sin_t, double sign) {
  const int head_dim = static_cast<int>(x.cols()) / heads;
  const int pairs = head_dim / 2;
  for (int h = 0; h < heads; ++h) {
    for (int j = 0; j < pairs; ++j) {
      const int a = h * head_dim + 2 * j;
      const Vec xa = x.col(a);
      const Vec xb = x.col(a + 1);
      const auto c = cos_t.col(j).array();
      const auto s = (sign * sin_t.col(j)).array();
      x.col(a) = (xa.array() * c - xb.array() * s).matrix();
      x.col(a + 1) = (xa.array() * s + xb.array() * c).matrix();
    }
  }
}

Mat linear(const Mat& x, const Mat& w, const Mat& b) {
  Mat out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

void linear_backward(const Mat& x, const Mat& d_out, const Mat& w, Mat& dw, Mat& db, Mat* dx) {
  dw.noalias() += x.transpose() * d_out;
  db.row(0) += d_out.colwise().sum();
  if (dx != nullptr) dx->noalias() += d_out * w.transpose();
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Mat keep(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) keep(i, j) = rng.uniform() < rate ? 0.0 : scale;
  return keep;
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 2 || d_ffn < 1 || codebooks < 1 || vocab < 1 ||
      ling_vocab < 1 || ling_dim < 1)
    throw ConfigError("ModelConfig: all counts must be >= 1");
  if (d_model % (2 * heads) != 0)
    throw ConfigError("ModelConfig: d_model must be divisible by 2 * heads");
  if (!(dropout >= 0.0 && dropout < 1.0) || !(layer_drop >= 0.0 && layer_drop < 1.0))
    throw ConfigError("ModelConfig: dropout rates must lie in [0, 1)");
}

LogitTensor::LogitTensor(int frames, int codebooks, int vocab)
    : frames_(frames), vocab_(vocab), layers_(codebooks, Mat::Zero(frames, vocab)) {}

bool LogitTensor::same_shape(const LogitTensor& other) const {
  return frames_ == other.frames_ && vocab_ == other.vocab_ && codebooks() == other.codebooks();
}

bool LogitTensor::all_finite() const {
  for (const auto& m : layers_)
    if (!m.allFinite()) return false;
  return true;
}

bool LogitTensor::operator==(const LogitTensor& other) const {
  if (!same_shape(other)) return false;
  for (int c = 0; c < codebooks(); ++c)
    if (layers_[c] != other.layers_[c]) return false;
  return true;
}

void add_encoder_params(ParamStore& p, const ModelConfig& cfg) {
  const int d = cfg.d_model;
  for (int i = 0; i < cfg.layers; ++i) {
    const auto pre = layer_prefix(i);
    p.add(pre + "ln1.gain", 1, d).setOnes();
    p.add(pre + "ln1.bias", 1, d);
    for (const char* m : {"wq", "wk", "wv", "wo"}) p.add(pre + "attn." + m, d, d);
    for (const char* m : {"bq", "bk", "bv", "bo"}) p.add(pre + "attn." + m, 1, d);
    p.add(pre + "ln2.gain", 1, d).setOnes();
    p.add(pre + "ln2.bias", 1, d);
    p.add(pre + "ffn.w1", d, cfg.d_ffn);
    p.add(pre + "ffn.b1", 1, cfg.d_ffn);
    p.add(pre + "ffn.w2", cfg.d_ffn, d);
    p.add(pre + "ffn.b2", 1, d);
  }
  p.add("final_ln.gain", 1, d).setOnes();
  p.add("final_ln.bias", 1, d);
  for (int c = 0; c < cfg.codebooks; ++c) {
    p.add("head." + std::to_string(c) + ".w", d, cfg.vocab);
    p.add("head." + std::to_string(c) + ".b", 1, cfg.vocab);
  }
}

void init_params(ParamStore& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& e : params.entries()) {
    const auto& n = e.name;
    const bool is_gain = n.ends_with(".gain") || n.ends_with("ln_gain");
    const bool is_bias = e.value.rows() == 1 && !n.starts_with("embed.");
    if (is_gain) {
      e.value.setOnes();
    } else if (is_bias) {
      e.value.setZero();
    } else {
      const double std = n.starts_with("embed.") ? kEmbeddingInitStd : kInitStd;
      for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = std * rng.normal();
    }
  }
}

void rotary_tables(int frames, int head_dim, Mat& cos_table, Mat& sin_table) {
  const int pairs = head_dim / 2;
  cos_table.resize(frames, pairs);
  sin_table.resize(frames, pairs);
  for (int j = 0; j < pairs; ++j) {
    const double theta = std::pow(kRotaryBase, -2.0 * j / head_dim);
    for (int t = 0; t < frames; ++t) {
      cos_table(t, j) = std::cos(t * theta);
      sin_table(t, j) = std::sin(t * theta);
    }
  }
}

LogitTensor forward(const ParamStore& p, const ModelConfig& cfg, const Mat& inputs,
                    int prompt_frames, bool train, Rng* rng, ForwardCache* cache) {
  if (!inputs.allFinite()) throw NumericError("forward: non-finite input");
  if (inputs.cols() != cfg.d_model) throw DimensionError("forward: input width != d_model");
  const int total = static_cast<int>(inputs.rows());
  if (prompt_frames < 0 || prompt_frames > total)
    throw DimensionError("forward: prompt longer than input");
  if (train && rng == nullptr) throw ConfigError("forward: train mode needs a random stream");

  const int heads = cfg.heads;
  const int head_dim = cfg.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Mat cos_t, sin_t;
  rotary_tables(total, head_dim, cos_t, sin_t);

  if (cache != nullptr) {
    cache->prompt_frames = prompt_frames;
    cache->layers.assign(cfg.layers, {});
  }
  ForwardCache::Layer scratch;

  Mat x = inputs;
  for (int i = 0; i < cfg.layers; ++i) {
    ForwardCache::Layer& L = cache != nullptr ? cache->layers[i] : scratch;
    L.skipped = train && cfg.layer_drop > 0.0 && rng->uniform() < cfg.layer_drop;
    if (L.skipped) continue;
    const auto pre = layer_prefix(i);

    L.h1 = ops::layer_norm(x, p.get(pre + "ln1.gain"), p.get(pre + "ln1.bias"), &L.ln1);
    L.q_rot = linear(L.h1, p.get(pre + "attn.wq"), p.get(pre + "attn.bq"));
    L.k_rot = linear(L.h1, p.get(pre + "attn.wk"), p.get(pre + "attn.bk"));
    L.v = linear(L.h1, p.get(pre + "attn.wv"), p.get(pre + "attn.bv"));
    apply_rotary(L.q_rot, heads, cos_t, sin_t, 1.0);
    apply_rotary(L.k_rot, heads, cos_t, sin_t, 1.0);

    L.attn.resize(total, cfg.d_model);
    L.probs.resize(heads);
    for (int h = 0; h < heads; ++h) {
      const auto q = L.q_rot.middleCols(h * head_dim, head_dim);
      const auto k = L.k_rot.middleCols(h * head_dim, head_dim);
      L.probs[h] = ops::softmax_rows((q * k.transpose()) * scale);
      L.attn.middleCols(h * head_dim, head_dim).noalias() =
          L.probs[h] * L.v.middleCols(h * head_dim, head_dim);
    }
    Mat o = linear(L.attn, p.get(pre + "attn.wo"), p.get(pre + "attn.bo"));
    if (train && cfg.dropout > 0.0) {
      L.attn_keep = dropout_mask(o.rows(), o.cols(), cfg.dropout, *rng);
      o.array() *= L.attn_keep.array();
    } else {
      L.attn_keep.resize(0, 0);
    }
    x += o;

    L.h2 = ops::layer_norm(x, p.get(pre + "ln2.gain"), p.get(pre + "ln2.bias"), &L.ln2);
    L.pre_relu = linear(L.h2, p.get(pre + "ffn.w1"), p.get(pre + "ffn.b1"));
    L.hidden = L.pre_relu.cwiseMax(0.0);
    Mat f = linear(L.hidden, p.get(pre + "ffn.w2"), p.get(pre + "ffn.b2"));
    if (train && cfg.dropout > 0.0) {
      L.ffn_keep = dropout_mask(f.rows(), f.cols(), cfg.dropout, *rng);
      f.array() *= L.ffn_keep.array();
    } else {
      L.ffn_keep.resize(0, 0);
    }
    x += f;
  }

  ops::LayerNormCache final_ln;
  Mat out = ops::layer_norm(x, p.get("final_ln.gain"), p.get("final_ln.bias"), &final_ln);
  const int source = total - prompt_frames;
  LogitTensor logits(source, cfg.codebooks, cfg.vocab);
  const auto src_rows = out.bottomRows(source);
  for (int c = 0; c < cfg.codebooks; ++c) {
    const auto n = "head." + std::to_string(c);
    logits.layer(c) = linear(src_rows, p.get(n + ".w"), p.get(n + ".b"));
  }
  if (cache != nullptr) {
    cache->final_ln = std::move(final_ln);
    cache->final_out = std::move(out);
  }
  return logits;
}

Mat backward(const ParamStore& p, const ModelConfig& cfg, const ForwardCache& cache,
             const LogitTensor& d_logits, ParamStore& g) {
  const int total = static_cast<int>(cache.final_out.rows());
  const int source = total - cache.prompt_frames;
  if (d_logits.frames() != source || d_logits.codebooks() != cfg.codebooks)
    throw DimensionError("backward: logit gradient shape mismatch");
  const int heads = cfg.heads;
  const int head_dim = cfg.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Mat cos_t, sin_t;
  rotary_tables(total, head_dim, cos_t, sin_t);

  Mat d_out = Mat::Zero(total, cfg.d_model);
  const Mat src_rows = cache.final_out.bottomRows(source);
  for (int c = 0; c < cfg.codebooks; ++c) {
    const auto n = "head." + std::to_string(c);
    Mat d_src = Mat::Zero(source, cfg.d_model);
    linear_backward(src_rows, d_logits.layer(c), p.get(n + ".w"), g.get(n + ".w"),
                    g.get(n + ".b"), &d_src);
    d_out.bottomRows(source) += d_src;
  }
  Mat dx = ops::layer_norm_backward(d_out, cache.final_ln, p.get("final_ln.gain"),
                                    g.get("final_ln.gain"), g.get("final_ln.bias"));

  for (int i = cfg.layers - 1; i >= 0; --i) {
    const auto& L = cache.layers[i];
    if (L.skipped) continue;
    const auto pre = layer_prefix(i);

    // FFN sub-block: x2 = x1 + drop(relu(LN2(x1) W1 + b1) W2 + b2).
    Mat d_f = dx;
    if (L.ffn_keep.size() != 0) d_f.array() *= L.ffn_keep.array();
    Mat d_hidden = Mat::Zero(total, cfg.d_ffn);
    linear_backward(L.hidden, d_f, p.get(pre + "ffn.w2"), g.get(pre + "ffn.w2"),
                    g.get(pre + "ffn.b2"), &d_hidden);
    d_hidden = (L.pre_relu.array() > 0.0).select(d_hidden, 0.0);
    Mat d_h2 = Mat::Zero(total, cfg.d_model);
    linear_backward(L.h2, d_hidden, p.get(pre + "ffn.w1"), g.get(pre + "ffn.w1"),
                    g.get(pre + "ffn.b1"), &d_h2);
    dx += ops::layer_norm_backward(d_h2, L.ln2, p.get(pre + "ln2.gain"), g.get(pre + "ln2.gain"),
                                   g.get(pre + "ln2.bias"));

    // Attention sub-block: x1 = x + drop(Attn(LN1(x)) Wo + bo).
    Mat d_o = dx;
    if (L.attn_keep.size() != 0) d_o.array() *= L.attn_keep.array();
    Mat d_attn = Mat::Zero(total, cfg.d_model);
    linear_backward(L.attn, d_o, p.get(pre + "attn.wo"), g.get(pre + "attn.wo"),
                    g.get(pre + "attn.bo"), &d_attn);
    Mat d_q(total, cfg.d_model), d_k(total, cfg.d_model), d_v(total, cfg.d_model);
    for (int h = 0; h < heads; ++h) {
      const auto cols = Eigen::seqN(h * head_dim, head_dim);
      const Mat& P = L.probs[h];
      const Mat d_a = d_attn(Eigen::all, cols);
      d_v(Eigen::all, cols).noalias() = P.transpose() * d_a;
      const Mat d_p = d_a * L.v(Eigen::all, cols).transpose();
      const Vec row_dot = (d_p.array() * P.array()).rowwise().sum();
      const Mat d_s = ((d_p.colwise() - row_dot).array() * P.array()).matrix() * scale;
      d_q(Eigen::all, cols).noalias() = d_s * L.k_rot(Eigen::all, cols);
      d_k(Eigen::all, cols).noalias() = d_s.transpose() * L.q_rot(Eigen::all, cols);
    }
    apply_rotary(d_q, heads, cos_t, sin_t, -1.0);
    apply_rotary(d_k, heads, cos_t, sin_t, -1.0);
    Mat d_h1 = Mat::Zero(total, cfg.d_model);
    linear_backward(L.h1, d_q, p.get(pre + "attn.wq"), g.get(pre + "attn.wq"),
                    g.get(pre + "attn.bq"), &d_h1);
    linear_backward(L.h1, d_k, p.get(pre + "attn.wk"), g.get(pre + "attn.wk"),
                    g.get(pre + "attn.bk"), &d_h1);
    linear_backward(L.h1, d_v, p.get(pre + "attn.wv"), g.get(pre + "attn.wv"),
                    g.get(pre + "attn.bv"), &d_h1);
    dx += ops::layer_norm_backward(d_h1, L.ln1, p.get(pre + "ln1.gain"), g.get(pre + "ln1.gain"),
                                   g.get(pre + "ln1.bias"));
  }
  return dx;
}

}  // namespace maskvct
