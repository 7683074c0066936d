#include "maskvct/sampler.hpp"

#include "maskvct/ops.hpp"

#include <algorithm>
#include <future>
#include <numeric>

namespace maskvct {

namespace {

// Substream purposes.
constexpr std::uint64_t kProposalStream = 1;
constexpr std::uint64_t kSelectionStream = 2;

DropFlags flags_for(GuidancePass pass) {
  switch (pass) {
    case GuidancePass::full: return drop_flags_for(DropMode::all);
    case GuidancePass::spk: return drop_flags_for(DropMode::spk);
    case GuidancePass::ling: return drop_flags_for(DropMode::ling);
    case GuidancePass::null: return drop_flags_for(DropMode::null);
  }
  return {};
}

}  // namespace

void SamplerConfig::validate(int codebooks) const {
  if (top_k < 1) throw ConfigError("SamplerConfig: top_k must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("SamplerConfig: top_p must lie in (0, 1]");
  if (step_budget.layers() != codebooks)
    throw ConfigError("SamplerConfig: step budget must list one entry per codebook layer");
  if (threads < 1) throw ConfigError("SamplerConfig: threads must be >= 1");
}

std::vector<int> select_positions(std::span<const double> confidences, int count, Rng& rng) {
  const int n = static_cast<int>(confidences.size());
  if (count < 0 || count > n) throw DomainError("select_positions: count exceeds masked frames");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (count == n) return order;
  std::vector<double> perturbed(n);
  for (int i = 0; i < n; ++i) perturbed[i] = confidences[i] + rng.gumbel();
  std::partial_sort(order.begin(), order.begin() + count, order.end(), [&](int a, int b) {
    return perturbed[a] != perturbed[b] ? perturbed[a] > perturbed[b] : a < b;
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

Vec truncated_probabilities(const Vec& logits, int top_k, double top_p) {
  const int n = static_cast<int>(logits.size());
  if (n == 0) throw DomainError("sample_token: empty logits");
  if (!logits.allFinite()) throw NumericError("sample_token: non-finite logits");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits(a) > logits(b); });
  const int k = std::clamp(top_k, 1, n);

  std::vector<double> p(k);
  const double m = logits(order[0]);
  double z = 0.0;
  for (int i = 0; i < k; ++i) z += p[i] = std::exp(logits(order[i]) - m);
  int keep = k;
  double cumulative = 0.0;
  for (int i = 0; i < k; ++i) {
    p[i] /= z;
    cumulative += p[i];
    if (cumulative >= top_p) {
      keep = i + 1;
      break;
    }
  }
  double kept = 0.0;
  for (int i = 0; i < keep; ++i) kept += p[i];
  Vec out = Vec::Zero(n);
  for (int i = 0; i < keep; ++i) out(order[i]) = p[i] / kept;
  return out;
}

int sample_token(const Vec& logits, int top_k, double top_p, Rng& rng) {
  const Vec probs = truncated_probabilities(logits, top_k, top_p);
  return rng.categorical(std::span<const double>(probs.data(), probs.size()));
}

LogitTensor guided_logits(const ConditionalModel& model, const ConditionBundle& bundle,
                          const MaskedGrid& state, const SamplerConfig& cfg) {
  const bool pitch = cfg.pitch_conditioned && bundle.pitch.has_value();
  const auto passes = required_passes(pitch, cfg.weights);
  std::vector<LogitTensor> results(passes.size());
  auto run = [&](std::size_t i) {
    DropFlags flags = flags_for(passes[i]);
    if (!pitch) flags.pitch = true;
    results[i] = model.predict(bundle, state, flags);
  };
  if (cfg.threads > 1 && passes.size() > 1) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 1; i < passes.size(); ++i) jobs.push_back(std::async(std::launch::async, run, i));
    run(0);
    for (auto& j : jobs) j.get();
  } else {
    for (std::size_t i = 0; i < passes.size(); ++i) run(i);
  }

  LogitQuadruple q;
  for (std::size_t i = 0; i < passes.size(); ++i) {
    switch (passes[i]) {
      case GuidancePass::full: q.full = std::move(results[i]); break;
      case GuidancePass::spk: q.spk = std::move(results[i]); break;
      case GuidancePass::ling: q.ling = std::move(results[i]); break;
      case GuidancePass::null: q.null = std::move(results[i]); break;
    }
  }
  if (!pitch && cfg.weights.w_all != 0.0) q.full = q.spk;
  const LogitTensor out = combine(q, cfg.weights);
  if (!out.all_finite()) throw NumericError("guided_logits: non-finite combined logits");
  return out;
}

TokenGrid generate(const ConditionBundle& bundle, int frames, const SamplerConfig& cfg,
                   const ConditionalModel& model, const StepObserver& observer) {
  const int C = model.codebooks();
  const int K = model.vocab();
  cfg.validate(C);
  if (frames < 1) throw ConfigError("generate: frame count must be >= 1");
  if (bundle.pitch && bundle.pitch->frames() != frames)
    throw ConfigError("generate: pitch contour length differs from frame count");

  MaskedGrid state = all_masked(frames, C, K);
  for (int c = 0; c < C; ++c) {
    if (c > 0) state = commit(state, c, {});
    const int steps = cfg.step_budget.steps_per_layer()[c];
    const auto counts = unmask_counts(frames, steps);
    for (int s = 0; s < steps; ++s) {
      if (counts[s] > 0) {
        std::vector<int> masked;
        for (int t = 0; t < frames; ++t)
          if (state.is_masked(t, c)) masked.push_back(t);

        const Mat layer = guided_logits(model, bundle, state, cfg).layer(c);
        std::vector<int> proposals(masked.size());
        std::vector<double> confidences(masked.size());
        for (std::size_t i = 0; i < masked.size(); ++i) {
          const int t = masked[i];
          const Vec z = layer.row(t).transpose();
          Rng rng = Rng::keyed(cfg.seed, {kProposalStream, static_cast<std::uint64_t>(c),
                                          static_cast<std::uint64_t>(s),
                                          static_cast<std::uint64_t>(t)});
          proposals[i] = sample_token(z, cfg.top_k, cfg.top_p, rng);
          confidences[i] = ops::log_softmax(z)(proposals[i]);
        }
        Rng select_rng = Rng::keyed(cfg.seed, {kSelectionStream, static_cast<std::uint64_t>(c),
                                               static_cast<std::uint64_t>(s)});
        const auto chosen = select_positions(confidences, counts[s], select_rng);
        std::vector<std::pair<int, int>> reveal;
        for (int i : chosen) reveal.emplace_back(masked[i], proposals[i]);
        state = commit(state, c, reveal);
      }
      if (observer) observer(c, s, state);
    }
  }
  return unmasked_grid(state, bundle.prompt.frame_rate_hz());
}

}  // namespace maskvct
