#include "maskvct/token_grid.hpp"

#include "maskvct/common.hpp"

#include <string>

namespace maskvct {

TokenGrid::TokenGrid(int frames, int codebooks, int vocab_size, double frame_rate_hz)
    : TokenGrid(std::vector<int>(static_cast<std::size_t>(std::max(frames, 0)) *
                                     std::max(codebooks, 0),
                                 0),
                frames, codebooks, vocab_size, frame_rate_hz) {}

TokenGrid::TokenGrid(std::vector<int> tokens, int frames, int codebooks, int vocab_size,
                     double frame_rate_hz)
    : frames_(frames),
      codebooks_(codebooks),
      vocab_size_(vocab_size),
      frame_rate_hz_(frame_rate_hz),
      tokens_(std::move(tokens)) {
  if (frames < 1 || codebooks < 1) throw DimensionError("TokenGrid: T and C must be >= 1");
  if (vocab_size < 1) throw DomainError("TokenGrid: vocab_size must be positive");
  if (!(frame_rate_hz > 0.0)) throw DomainError("TokenGrid: frame rate must be positive");
  if (tokens_.size() != static_cast<std::size_t>(frames) * codebooks)
    throw DimensionError("TokenGrid: token count does not match T x C");
  for (int v : tokens_)
    if (v < 0 || v >= vocab_size)
      throw FormatError("TokenGrid: token id " + std::to_string(v) + " outside [0, K-1]");
}

void TokenGrid::set(int t, int c, int token) {
  if (token < 0 || token >= vocab_size_) throw DomainError("TokenGrid::set: token out of range");
  tokens_[index(t, c)] = token;
}

LayeredMask::LayeredMask(int frames, int codebooks, int target_layer,
                         std::vector<std::uint8_t> keep_row)
    : frames_(frames),
      codebooks_(codebooks),
      target_layer_(target_layer),
      keep_row_(std::move(keep_row)) {
  if (frames < 1 || codebooks < 1) throw DimensionError("LayeredMask: T and C must be >= 1");
  if (target_layer < 0 || target_layer >= codebooks)
    throw DomainError("LayeredMask: target layer outside [0, C-1]");
  if (keep_row_.size() != static_cast<std::size_t>(frames))
    throw DimensionError("LayeredMask: keep row length must equal T");
  for (auto& k : keep_row_)
    if (k > 1) throw DomainError("LayeredMask: keep entries must be 0 or 1");
}

LayeredMask LayeredMask::from_matrix(int frames, int codebooks, int target_layer,
                                     const std::vector<std::uint8_t>& keep) {
  if (keep.size() != static_cast<std::size_t>(frames) * codebooks)
    throw DimensionError("LayeredMask: keep matrix must be T x C");
  if (target_layer < 0 || target_layer >= codebooks)
    throw DomainError("LayeredMask: target layer outside [0, C-1]");
  std::vector<std::uint8_t> row(frames);
  for (int t = 0; t < frames; ++t) {
    for (int c = 0; c < codebooks; ++c) {
      const std::uint8_t k = keep[static_cast<std::size_t>(t) * codebooks + c];
      if (c < target_layer && k != 1)
        throw DomainError("LayeredMask: layer below target must be unmasked");
      if (c > target_layer && k != 0)
        throw DomainError("LayeredMask: layer above target must be masked");
    }
    row[t] = keep[static_cast<std::size_t>(t) * codebooks + target_layer];
  }
  return LayeredMask(frames, codebooks, target_layer, std::move(row));
}

int LayeredMask::masked_count() const {
  int n = 0;
  for (auto k : keep_row_) n += k == 0;
  return n;
}

MaskedGrid apply_mask(const TokenGrid& grid, const LayeredMask& mask) {
  if (grid.frames() != mask.frames() || grid.codebooks() != mask.codebooks())
    throw DimensionError("apply_mask: grid and mask shapes differ");
  MaskedGrid out;
  out.vocab_size_ = grid.vocab_size();
  out.mask_ = mask;
  out.tokens_ = grid.data();
  for (int t = 0; t < grid.frames(); ++t)
    for (int c = 0; c < grid.codebooks(); ++c)
      if (!mask.keep(t, c)) out.tokens_[static_cast<std::size_t>(t) * grid.codebooks() + c] = grid.vocab_size();
  return out;
}

std::vector<std::pair<int, int>> masked_positions(const LayeredMask& mask) {
  std::vector<std::pair<int, int>> out;
  const int c = mask.target_layer();
  for (int t = 0; t < mask.frames(); ++t)
    if (!mask.keep(t, c)) out.emplace_back(t, c);
  return out;
}

MaskedGrid all_masked(int frames, int codebooks, int vocab_size) {
  MaskedGrid out;
  out.vocab_size_ = vocab_size;
  out.mask_ = LayeredMask(frames, codebooks, 0, std::vector<std::uint8_t>(frames, 0));
  out.tokens_.assign(static_cast<std::size_t>(frames) * codebooks, vocab_size);
  return out;
}

MaskedGrid commit(const MaskedGrid& state, int layer,
                  const std::vector<std::pair<int, int>>& frame_tokens) {
  const int target = state.mask().target_layer();
  if (layer < target || layer >= state.codebooks())
    throw DomainError("commit: layer must be >= current target and < C");
  MaskedGrid out = state;
  std::vector<std::uint8_t> row = state.mask().keep_row();
  if (layer > target) {
    if (state.mask().masked_count() != 0)
      throw DomainError("commit: cannot advance past an incomplete layer");
    row.assign(state.frames(), 0);
  }
  for (auto [t, token] : frame_tokens) {
    if (t < 0 || t >= state.frames()) throw DomainError("commit: frame out of range");
    if (token < 0 || token >= state.vocab_size()) throw DomainError("commit: token out of range");
    if (row[t] != 0) throw DomainError("commit: position already visible");
    row[t] = 1;
    out.tokens_[static_cast<std::size_t>(t) * state.codebooks() + layer] = token;
  }
  out.mask_ = LayeredMask(state.frames(), state.codebooks(), layer, std::move(row));
  return out;
}

TokenGrid unmasked_grid(const MaskedGrid& state, double frame_rate_hz) {
  const bool complete = state.mask().target_layer() == state.codebooks() - 1 &&
                        state.mask().masked_count() == 0;
  if (!complete) throw DomainError("unmasked_grid: grid still has masked positions");
  return TokenGrid(state.data(), state.frames(), state.codebooks(), state.vocab_size(),
                   frame_rate_hz);
}

}  // namespace maskvct
