#pragma once

#include "maskvct/common.hpp"
#include "maskvct/conditioning.hpp"
#include "maskvct/ops.hpp"
#include "maskvct/params.hpp"
#include "maskvct/rng.hpp"

#include <vector>

namespace maskvct {

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ffn = 256;
  int codebooks = 3;
  int vocab = 16;
  int ling_vocab = 8;
  int ling_dim = 16;
  double dropout = 0.05;
  double layer_drop = 0.05;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
  EmbeddingShape embedding_shape() const {
    return {codebooks, vocab, ling_vocab, ling_dim, d_model};
  }
  bool operator==(const ModelConfig&) const = default;
};

/// Class scores per source frame and codebook layer, over real token ids.
class LogitTensor {
 public:
  LogitTensor() = default;
  LogitTensor(int frames, int codebooks, int vocab);

  int frames() const { return frames_; }
  int codebooks() const { return static_cast<int>(layers_.size()); }
  int vocab() const { return vocab_; }
  /// frames x vocab scores of one codebook layer.
  Mat& layer(int c) { return layers_.at(c); }
  const Mat& layer(int c) const { return layers_.at(c); }
  bool same_shape(const LogitTensor& other) const;
  bool all_finite() const;

  bool operator==(const LogitTensor& other) const;

 private:
  int frames_ = 0;
  int vocab_ = 0;
  std::vector<Mat> layers_;
};

/// Activations saved by forward() for backward().
struct ForwardCache {
  struct Layer {
    bool skipped = false;
    ops::LayerNormCache ln1;
    Mat h1;
    Mat q_rot, k_rot, v;
    std::vector<Mat> probs;  // per head, T x T
    Mat attn;
    Mat attn_keep;  // dropout multipliers, empty when inactive
    ops::LayerNormCache ln2;
    Mat h2;
    Mat pre_relu;
    Mat hidden;
    Mat ffn_keep;
  };
  int prompt_frames = 0;
  std::vector<Layer> layers;
  ops::LayerNormCache final_ln;
  Mat final_out;
};

/// Registers the encoder stack and head parameters.
void add_encoder_params(ParamStore& params, const ModelConfig& cfg);

/// Normal(0, 0.02) projections, zero biases, unit LayerNorm gains; embedding
/// tables get a wider spread so they start on the pitch embedding's scale.
void init_params(ParamStore& params, std::uint64_t seed);

/// Runs the PreLN encoder over prompt + source frames and returns logits for
/// the source frames only. `rng` is required when `train` is true.
LogitTensor forward(const ParamStore& params, const ModelConfig& cfg, const Mat& inputs,
                    int prompt_frames, bool train, Rng* rng, ForwardCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` and returns d loss / d inputs.
Mat backward(const ParamStore& params, const ModelConfig& cfg, const ForwardCache& cache,
             const LogitTensor& d_logits, ParamStore& grads);

/// cos/sin tables for rotary encoding: rows = positions, cols = head_dim / 2.
void rotary_tables(int frames, int head_dim, Mat& cos_table, Mat& sin_table);

}  // namespace maskvct
