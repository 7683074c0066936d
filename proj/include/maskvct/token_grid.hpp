#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace maskvct {

/// T x C grid of acoustic codebook indices, frame-major (tokens[t][c]).
class TokenGrid {
 public:
  TokenGrid() = default;
  /// Grid filled with token 0.
  TokenGrid(int frames, int codebooks, int vocab_size, double frame_rate_hz = 50.0);
  /// Takes `tokens` in frame-major order; throws FormatError on out-of-range ids.
  TokenGrid(std::vector<int> tokens, int frames, int codebooks, int vocab_size,
            double frame_rate_hz = 50.0);

  int frames() const { return frames_; }
  int codebooks() const { return codebooks_; }
  int vocab_size() const { return vocab_size_; }
  double frame_rate_hz() const { return frame_rate_hz_; }

  int at(int t, int c) const { return tokens_[index(t, c)]; }
  void set(int t, int c, int token);
  const std::vector<int>& data() const { return tokens_; }

  bool operator==(const TokenGrid&) const = default;

 private:
  std::size_t index(int t, int c) const {
    return static_cast<std::size_t>(t) * codebooks_ + c;
  }

  int frames_ = 0;
  int codebooks_ = 0;
  int vocab_size_ = 0;
  double frame_rate_hz_ = 50.0;
  std::vector<int> tokens_;
};

/// Binary keep/mask matrix with layered structure around a target layer:
/// layers below are fully visible, layers above fully masked, and the
/// target layer follows `keep_row`.
class LayeredMask {
 public:
  LayeredMask() = default;
  LayeredMask(int frames, int codebooks, int target_layer, std::vector<std::uint8_t> keep_row);

  /// Builds a mask from a full T x C keep matrix (frame-major), throwing
  /// DomainError if the layered invariant does not hold.
  static LayeredMask from_matrix(int frames, int codebooks, int target_layer,
                                 const std::vector<std::uint8_t>& keep);

  int frames() const { return frames_; }
  int codebooks() const { return codebooks_; }
  int target_layer() const { return target_layer_; }
  bool keep(int t, int c) const {
    if (c < target_layer_) return true;
    if (c > target_layer_) return false;
    return keep_row_[t] != 0;
  }
  const std::vector<std::uint8_t>& keep_row() const { return keep_row_; }
  int masked_count() const;

  bool operator==(const LayeredMask&) const = default;

 private:
  int frames_ = 0;
  int codebooks_ = 0;
  int target_layer_ = 0;
  std::vector<std::uint8_t> keep_row_;
};

/// Token grid with masked entries replaced by the sentinel id K.
class MaskedGrid {
 public:
  MaskedGrid() = default;

  int frames() const { return mask_.frames(); }
  int codebooks() const { return mask_.codebooks(); }
  int vocab_size() const { return vocab_size_; }
  int sentinel() const { return vocab_size_; }
  int at(int t, int c) const { return tokens_[static_cast<std::size_t>(t) * codebooks() + c]; }
  bool is_masked(int t, int c) const { return !mask_.keep(t, c); }
  const LayeredMask& mask() const { return mask_; }
  const std::vector<int>& data() const { return tokens_; }

  bool operator==(const MaskedGrid&) const = default;

 private:
  friend MaskedGrid apply_mask(const TokenGrid& grid, const LayeredMask& mask);
  friend MaskedGrid all_masked(int frames, int codebooks, int vocab_size);
  friend MaskedGrid commit(const MaskedGrid&, int, const std::vector<std::pair<int, int>>&);

  int vocab_size_ = 0;
  std::vector<int> tokens_;
  LayeredMask mask_;
};

/// Replaces every masked entry of `grid` by the sentinel. Throws DimensionError
/// on shape mismatch.
MaskedGrid apply_mask(const TokenGrid& grid, const LayeredMask& mask);

/// Target-layer positions with keep = 0, ascending by frame.
std::vector<std::pair<int, int>> masked_positions(const LayeredMask& mask);

/// Fully masked grid with target layer 0 (sampler start state).
MaskedGrid all_masked(int frames, int codebooks, int vocab_size);

/// Reveals `frame_tokens` (frame, token) on the target layer of `state`
/// at layer `layer`. When `layer` is above the current target, the state
/// first advances to that layer; the previous target must be complete.
MaskedGrid commit(const MaskedGrid& state, int layer,
                  const std::vector<std::pair<int, int>>& frame_tokens);

/// Extracts the grid from a fully visible MaskedGrid.
TokenGrid unmasked_grid(const MaskedGrid& state, double frame_rate_hz = 50.0);

}  // namespace maskvct
