#include "maskvct/guidance.hpp"

#include <algorithm>

namespace maskvct {

LogitTensor combine(const LogitQuadruple& q, const GuidanceWeights& w) {
  const LogitTensor& base = q.ling;
  auto check = [&](const LogitTensor& t) {
    if (!t.same_shape(base)) throw DimensionError("combine: logit tensors differ in shape");
  };
  if (w.w_all != 0.0) check(q.full);
  if (w.w_spk != 0.0) check(q.spk);
  if (w.w_ling != 0.0) check(q.null);

  LogitTensor out = base;
  for (int c = 0; c < base.codebooks(); ++c) {
    Mat& o = out.layer(c);
    const Mat& l = base.layer(c);
    if (w.w_all != 0.0) o += w.w_all * (q.full.layer(c) - l);
    if (w.w_spk != 0.0) o += w.w_spk * (q.spk.layer(c) - l);
    if (w.w_ling != 0.0) o += w.w_ling * (l - q.null.layer(c));
  }
  return out;
}

std::vector<GuidancePass> required_passes(bool pitch_present, const GuidanceWeights& w) {
  std::vector<GuidancePass> passes{GuidancePass::ling};
  const bool need_spk = w.w_spk != 0.0 || (w.w_all != 0.0 && !pitch_present);
  if (w.w_all != 0.0 && pitch_present) passes.push_back(GuidancePass::full);
  if (need_spk) passes.push_back(GuidancePass::spk);
  if (w.w_ling != 0.0) passes.push_back(GuidancePass::null);
  return passes;
}

}  // namespace maskvct
