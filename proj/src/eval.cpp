#include "maskvct/eval.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace maskvct {

FpcReport fpc(const PitchContour& a, const PitchContour& b) {
  if (a.frames() != b.frames()) throw DimensionError("fpc: contours differ in length");
  std::vector<double> x, y;
  for (int t = 0; t < a.frames(); ++t) {
    if (a.f0_hz[t] > 0.0 && b.f0_hz[t] > 0.0) {
      x.push_back(std::log(1.0 + a.f0_hz[t]));
      y.push_back(std::log(1.0 + b.f0_hz[t]));
    }
  }
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2) throw UndefinedMetricError("fpc: fewer than two mutually voiced frames");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  // Relative threshold: contours that are constant up to rounding count as flat.
  if (sxx <= 1e-24 * n || syy <= 1e-24 * n) throw UndefinedMetricError("fpc: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), static_cast<int>(x.size())};
}

StateKey state_key(const MaskedGrid& state) {
  return {state.mask().target_layer(), state.data()};
}

namespace {

// Truncated sampling distribution written from the definition: a class
// survives top-k when fewer than k classes outrank it, and survives top-p
// when the mass ranked strictly above it is still below p.
std::vector<double> oracle_truncation(const Vec& z, int top_k, double top_p) {
  const int n = static_cast<int>(z.size());
  std::vector<int> rank(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (z(j) > z(i) || (z(j) == z(i) && j < i)) ++rank[i];
  std::vector<int> by_rank(n);
  for (int i = 0; i < n; ++i) by_rank[rank[i]] = i;

  const int k = std::min(std::max(top_k, 1), n);
  double zmax = z(by_rank[0]);
  double mass = 0.0;
  for (int r = 0; r < k; ++r) mass += std::exp(z(by_rank[r]) - zmax);
  std::vector<double> out(n, 0.0);
  double above = 0.0;
  double kept = 0.0;
  for (int r = 0; r < k; ++r) {
    if (above >= top_p) break;
    const double pr = std::exp(z(by_rank[r]) - zmax) / mass;
    out[by_rank[r]] = pr;
    kept += pr;
    above += pr;
  }
  for (double& v : out) v /= kept;
  return out;
}

double oracle_log_prob(const Vec& z, int cls) {
  double zmax = z.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < z.size(); ++i) s += std::exp(z(i) - zmax);
  return z(cls) - zmax - std::log(s);
}

// Probability of each size-m subset under Gumbel-top-m selection, which is
// sequential sampling without replacement proportional to exp(score).
void subset_probabilities(const std::vector<double>& scores, int m,
                          std::map<std::vector<int>, double>& out) {
  const int n = static_cast<int>(scores.size());
  std::vector<double> w(n);
  const double smax = *std::max_element(scores.begin(), scores.end());
  for (int i = 0; i < n; ++i) w[i] = std::exp(scores[i] - smax);
  std::vector<int> chosen;
  std::vector<bool> used(n, false);
  std::function<void(double, double)> rec = [&](double prob, double remaining) {
    if (static_cast<int>(chosen.size()) == m) {
      std::vector<int> key = chosen;
      std::sort(key.begin(), key.end());
      out[key] += prob;
      return;
    }
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = true;
      chosen.push_back(i);
      rec(prob * w[i] / remaining, remaining - w[i]);
      chosen.pop_back();
      used[i] = false;
    }
  };
  rec(1.0, std::accumulate(w.begin(), w.end(), 0.0));
}

}  // namespace

std::vector<std::pair<MaskedGrid, double>> brute_force_step_oracle(
    const ConditionalModel& model, const ConditionBundle& bundle, const MaskedGrid& state,
    const SamplerConfig& cfg, int layer, int count) {
  const int frames = state.frames();
  const int K = state.vocab_size();
  if (frames * K > 64) throw DomainError("brute_force_step_oracle: instance too large to enumerate");
  if (layer != state.mask().target_layer())
    throw DomainError("brute_force_step_oracle: state must target the stepped layer");

  std::vector<int> masked;
  for (int t = 0; t < frames; ++t)
    if (state.is_masked(t, layer)) masked.push_back(t);
  const int n = static_cast<int>(masked.size());
  if (count < 0 || count > n) throw DomainError("brute_force_step_oracle: bad unmask count");
  if (count == 0) return {{state, 1.0}};

  const Mat logits = guided_logits(model, bundle, state, cfg).layer(layer);
  std::vector<std::vector<double>> q(n);
  std::vector<Vec> z(n);
  for (int i = 0; i < n; ++i) {
    z[i] = logits.row(masked[i]).transpose();
    q[i] = oracle_truncation(z[i], cfg.top_k, cfg.top_p);
  }

  std::map<StateKey, std::pair<MaskedGrid, double>> acc;
  std::vector<int> proposal(n, 0);
  std::function<void(int, double)> enumerate = [&](int i, double prob) {
    if (prob == 0.0) return;
    if (i == n) {
      std::map<std::vector<int>, double> subsets;
      if (count == n) {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        subsets[all] = 1.0;
      } else {
        std::vector<double> scores(n);
        for (int j = 0; j < n; ++j) scores[j] = oracle_log_prob(z[j], proposal[j]);
        subset_probabilities(scores, count, subsets);
      }
      for (const auto& [subset, ps] : subsets) {
        std::vector<std::pair<int, int>> reveal;
        for (int j : subset) reveal.emplace_back(masked[j], proposal[j]);
        MaskedGrid next = commit(state, layer, reveal);
        auto key = state_key(next);
        auto it = acc.find(key);
        if (it == acc.end()) acc.emplace(key, std::make_pair(std::move(next), prob * ps));
        else it->second.second += prob * ps;
      }
      return;
    }
    for (int tok = 0; tok < K; ++tok) {
      proposal[i] = tok;
      enumerate(i + 1, prob * q[i][tok]);
    }
  };
  enumerate(0, 1.0);

  std::vector<std::pair<MaskedGrid, double>> out;
  for (auto& [key, entry] : acc) out.push_back(std::move(entry));
  return out;
}

std::map<std::vector<int>, double> exact_output_distribution(const ConditionalModel& model,
                                                             const ConditionBundle& bundle,
                                                             int frames, const SamplerConfig& cfg) {
  const int C = model.codebooks();
  cfg.validate(C);
  std::map<StateKey, std::pair<MaskedGrid, double>> current;
  {
    MaskedGrid start = all_masked(frames, C, model.vocab());
    current.emplace(state_key(start), std::make_pair(start, 1.0));
  }
  for (int c = 0; c < C; ++c) {
    if (c > 0) {
      decltype(current) advanced;
      for (auto& [key, entry] : current) {
        MaskedGrid next = commit(entry.first, c, {});
        advanced.emplace(state_key(next), std::make_pair(std::move(next), entry.second));
      }
      current = std::move(advanced);
    }
    const int steps = cfg.step_budget.steps_per_layer()[c];
    const auto counts = unmask_counts(frames, steps);
    for (int s = 0; s < steps; ++s) {
      decltype(current) next;
      for (auto& [key, entry] : current) {
        for (auto& [state, p] :
             brute_force_step_oracle(model, bundle, entry.first, cfg, c, counts[s])) {
          auto k = state_key(state);
          auto it = next.find(k);
          if (it == next.end()) next.emplace(k, std::make_pair(std::move(state), entry.second * p));
          else it->second.second += entry.second * p;
        }
      }
      current = std::move(next);
    }
  }
  std::map<std::vector<int>, double> out;
  for (auto& [key, entry] : current) out[key.second] += entry.second;
  return out;
}

double total_variation(const std::map<std::vector<int>, double>& p,
                       const std::map<std::vector<int>, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q)
    if (!p.contains(k)) tv += std::abs(v);
  return 0.5 * tv;
}

AccuracyReport masked_accuracy(const CodecModel& model, std::span<const TrainingExample> examples,
                               std::uint64_t seed, DropMode mode, bool continuous) {
  AccuracyReport report;
  const int C = model.config().codebooks;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TrainingExample& ex = examples[i];
    Rng rng = Rng::keyed(seed, {0xacc, i});
    const MaskingDraw draw = draw_training_mask(ex.target.frames(), C, rng);
    const LayeredMask mask(ex.target.frames(), C, draw.target_layer, draw.keep_row);
    const MaskedGrid masked = apply_mask(ex.target, mask);
    const LogitTensor logits = model.predict(ex.bundle(continuous), masked, drop_flags_for(mode));
    for (auto [t, c] : masked_positions(mask)) {
      Eigen::Index best;
      logits.layer(c).row(t).maxCoeff(&best);
      report.correct += static_cast<int>(best) == ex.target.at(t, c);
      ++report.total;
    }
  }
  return report;
}

double ProbeResult::speaker_rate() const {
  return tokens > 0 ? static_cast<double>(speaker_consistent) / tokens : 0.0;
}

double ProbeResult::ling_rate() const {
  return tokens > 0 ? static_cast<double>(ling_consistent) / tokens : 0.0;
}

double ProbeResult::mean_fpc() const { return stats::mean(fpc_values); }

PitchContour decode_pitch(const SynthWorld& world, const TokenGrid& grid,
                          const LinguisticSequence& ling, int speaker) {
  const auto aligned = upsample_linguistic(ling, grid.frames());
  PitchContour out;
  out.frame_rate_hz = grid.frame_rate_hz();
  for (int t = 0; t < grid.frames(); ++t) {
    int best = -1, best_votes = 0;
    for (int b = 0; b < world.spec().pitch_buckets; ++b) {
      int votes = 0;
      for (int c = 0; c < grid.codebooks(); ++c)
        votes += grid.at(t, c) == world.token(c, aligned.tokens[t], speaker, b);
      if (votes > best_votes) {
        best_votes = votes;
        best = b;
      }
    }
    out.f0_hz.push_back(best < 0 ? 0.0 : world.bucket_center_hz(best));
  }
  return out;
}

std::vector<ProbeResult> cfg_probe(const CodecModel& model, const SynthWorld& world,
                                   std::span<const ProbeSetting> settings,
                                   const ProbeOptions& options) {
  std::vector<ProbeResult> results;
  const auto& ws = world.spec();
  for (const auto& setting : settings) {
    ProbeResult r;
    r.setting = setting;
    for (int g = 0; g < options.generations; ++g) {
      const SynthSample sample = world.sample(options.first_index + g);
      const TrainingExample& ex = sample.example;
      ConditionBundle bundle = ex.bundle(setting.continuous);
      if (!setting.pitch_conditioned) bundle.pitch.reset();

      SamplerConfig sc;
      sc.step_budget = options.step_budget;
      sc.top_k = options.top_k;
      sc.top_p = options.top_p;
      sc.seed = mix64(options.seed ^ mix64(static_cast<std::uint64_t>(g)));
      sc.weights = setting.weights;
      sc.pitch_conditioned = setting.pitch_conditioned;
      sc.threads = options.threads;
      const TokenGrid out = generate(bundle, ex.target.frames(), sc, model);

      const auto aligned = upsample_linguistic(ex.ling_discrete, out.frames());
      long spk = 0, ling = 0, n = 0;
      for (int t = 0; t < out.frames(); ++t) {
        const int true_bucket = world.pitch_bucket(ex.pitch.f0_hz[t]);
        for (int c = 0; c < out.codebooks(); ++c) {
          const int tok = out.at(t, c);
          bool s_ok = false, l_ok = false;
          for (int b = 0; b < ws.pitch_buckets && !s_ok; ++b)
            s_ok = tok == world.token(c, aligned.tokens[t], sample.speaker, b);
          for (int s = 0; s < ws.n_speakers && !l_ok; ++s)
            l_ok = tok == world.token(c, aligned.tokens[t], s, true_bucket);
          spk += s_ok;
          ling += l_ok;
          ++n;
        }
      }
      r.tokens += n;
      r.speaker_consistent += spk;
      r.ling_consistent += ling;
      r.speaker_rates.push_back(static_cast<double>(spk) / n);
      r.ling_rates.push_back(static_cast<double>(ling) / n);

      double f = 0.0;
      try {
        f = fpc(decode_pitch(world, out, ex.ling_discrete, sample.speaker), ex.pitch).fpc;
        ++r.fpc_defined;
      } catch (const UndefinedMetricError&) {
      }
      r.fpc_values.push_back(f);
      ++r.generations;
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::string probe_csv(std::span<const ProbeResult> results) {
  std::ostringstream os;
  os.precision(6);
  os << "setting,w_all,w_spk,w_ling,pitch,continuous,generations,tokens,speaker_rate,ling_rate,"
        "mean_fpc,fpc_defined\n";
  for (const auto& r : results) {
    const auto& s = r.setting;
    os << s.name << ',' << s.weights.w_all << ',' << s.weights.w_spk << ',' << s.weights.w_ling
       << ',' << (s.pitch_conditioned ? 1 : 0) << ',' << (s.continuous ? 1 : 0) << ','
       << r.generations << ',' << r.tokens << ',' << r.speaker_rate() << ',' << r.ling_rate()
       << ',' << r.mean_fpc() << ',' << r.fpc_defined << '\n';
  }
  return os.str();
}

namespace stats {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double chi_square_pvalue(std::span<const long> observed, std::span<const double> expected_probs) {
  if (observed.size() != expected_probs.size() || observed.size() < 2)
    throw DimensionError("chi_square_pvalue: need matching category counts");
  const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), 0L));
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = total * expected_probs[i];
    stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double welch_greater_pvalue(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("welch_greater_pvalue: need >= 2 samples each");
  auto var = [](std::span<const double> x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
  };
  const double ma = mean(a), mb = mean(b);
  const double va = var(a, ma) / static_cast<double>(a.size());
  const double vb = var(b, mb) / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (se2 <= 0.0) return ma > mb ? 0.0 : 1.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (a.size() - 1) + vb * vb / (b.size() - 1));
  boost::math::students_t dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace stats

}  // namespace maskvct
