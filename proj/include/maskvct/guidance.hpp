#pragma once

#include "maskvct/net.hpp"

#include <vector>

namespace maskvct {

/// Coefficients of the three guidance terms. Negative values are allowed.
struct GuidanceWeights {
  double w_all = 0.0;
  double w_spk = 0.0;
  double w_ling = 0.0;

  bool operator==(const GuidanceWeights&) const = default;
};

/// Named presets.
inline constexpr GuidanceWeights kAllModeWeights{1.5, 1.0, 1.0};
inline constexpr GuidanceWeights kSpkModeWeights{0.0, 2.0, 0.5};

/// Logits of the four conditioning configurations:
/// full (A_p, L, P), spk (A_p, L, -), ling (-, L, -), null (-, -, -).
struct LogitQuadruple {
  LogitTensor full;
  LogitTensor spk;
  LogitTensor ling;
  LogitTensor null;
};

enum class GuidancePass { full, spk, ling, null };

/// ling + w_all (full - ling) + w_spk (spk - ling) + w_ling (ling - null),
/// elementwise. Tensors whose coefficient is zero are not read.
LogitTensor combine(const LogitQuadruple& q, const GuidanceWeights& w);

/// Minimal set of network passes needed by combine(). Without pitch, the
/// full configuration equals spk and is served by the spk pass.
std::vector<GuidancePass> required_passes(bool pitch_present, const GuidanceWeights& w);

}  // namespace maskvct
