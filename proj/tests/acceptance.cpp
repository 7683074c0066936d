// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.

#include "maskvct/conditioning.hpp"
#include "maskvct/eval.hpp"
#include "maskvct/guidance.hpp"
#include "maskvct/io.hpp"
#include "maskvct/net.hpp"
#include "maskvct/sampler.hpp"
#include "maskvct/schedules.hpp"
#include "maskvct/synth_world.hpp"
#include "maskvct/token_grid.hpp"
#include "maskvct/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace maskvct;
namespace fs = std::filesystem;
namespace mt = maskvct::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Pitch embedding numerics.
Outcome pitch_numerics() {
  Rng rng(101);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const double f = rng.uniform() < 0.1 ? 0.0 : std::exp(rng.uniform() * std::log(20000.0)) - 1.0;
    const int d = 2 * (1 + static_cast<int>(rng.uniform_int(256)));
    const Vec e = pitch_embedding(f, d);
    if (e.size() != d) return {false, "wrong embedding length"};
    for (int i = 0; i < d; ++i) worst = std::max(worst, std::abs(e(i) - mt::direct_pitch_entry(f, d, i)));
  }
  bool ok = worst < 1e-9;
  const Vec zero = pitch_embedding(0.0, 4);
  ok = ok && zero(0) == 0.0 && zero(1) == 0.0 && zero(2) == 1.0 && zero(3) == 1.0;
  const double em1 = std::numbers::e - 1.0;
  const Vec two = pitch_embedding(em1, 2);
  ok = ok && std::abs(two(0) - 0.8414709848) < 1e-9 && std::abs(two(1) - 0.5403023059) < 1e-9;
  const Vec four = pitch_embedding(em1, 4);
  const double expected[4] = {0.8414709848, 0.0099998333, 0.5403023059, 0.9999500004};
  for (int i = 0; i < 4; ++i) ok = ok && std::abs(four(i) - expected[i]) < 1e-9;
  return {ok, "max deviation " + fmt(worst, 3) + " over 1000 pairs; tabulated examples checked"};
}

// 2. Schedule laws.
Outcome schedule_laws() {
  bool ok = true;
  double worst_sum = 0.0;
  for (int C = 2; C <= 16; ++C) {
    const auto p = layer_distribution(C);
    double s = 0.0;
    for (int c = 0; c < C; ++c) {
      s += p[c];
      if (c > 0 && !(p[c] < p[c - 1])) ok = false;
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  ok = ok && worst_sum <= 1e-12;
  ok = ok && keep_probability(0.0) == 1.0 && keep_probability(1.0) == 0.0;
  long sweeps = 0;
  for (int m = 0; m <= 1000; ++m)
    for (int s = 1; s <= 64; ++s) {
      const auto counts = unmask_counts(m, s);
      long total = 0;
      for (int k : counts) {
        if (k < 0) ok = false;
        total += k;
      }
      if (total != m || static_cast<int>(counts.size()) != s) ok = false;
      ++sweeps;
    }
  return {ok, "max |sum p - 1| " + fmt(worst_sum, 3) + "; " + std::to_string(sweeps) +
                  " unmask_counts cases"};
}

// 3. Mask structure.
Outcome mask_structure() {
  Rng rng(303);
  bool ok = true;
  for (int n = 0; n < 10000 && ok; ++n) {
    const int T = 1 + static_cast<int>(rng.uniform_int(64));
    const int C = 2 + static_cast<int>(rng.uniform_int(11));
    const int K = 2 + static_cast<int>(rng.uniform_int(30));
    const MaskingDraw draw = draw_training_mask(T, C, rng);
    const LayeredMask mask(T, C, draw.target_layer, draw.keep_row);
    TokenGrid grid(T, C, K);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) grid.set(t, c, static_cast<int>(rng.uniform_int(K)));
    const MaskedGrid m = apply_mask(grid, mask);
    std::vector<std::pair<int, int>> expected;
    long above = 0;
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        const bool keep = mask.keep(t, c);
        if (c < draw.target_layer && !keep) ok = false;
        if (c > draw.target_layer && keep) ok = false;
        if (c == draw.target_layer && keep != (draw.keep_row[t] != 0)) ok = false;
        if (keep ? m.at(t, c) != grid.at(t, c) : m.at(t, c) != K) ok = false;
        if (c > draw.target_layer) above += m.at(t, c) == K;
      }
    for (int t = 0; t < T; ++t)
      if (!mask.keep(t, draw.target_layer)) expected.emplace_back(t, draw.target_layer);
    if (masked_positions(mask) != expected) ok = false;
    if (above != static_cast<long>(T) * (C - 1 - draw.target_layer)) ok = false;
  }
  return {ok, "10000 random masks"};
}

// 4. Guidance combination algebra.
LogitTensor random_tensor(int T, int C, int K, Rng& rng) {
  LogitTensor z(T, C, K);
  for (int c = 0; c < C; ++c)
    for (Eigen::Index i = 0; i < z.layer(c).size(); ++i) z.layer(c).data()[i] = 3.0 * rng.normal();
  return z;
}

double max_diff(const LogitTensor& a, const LogitTensor& b) {
  double m = 0.0;
  for (int c = 0; c < a.codebooks(); ++c) m = std::max(m, (a.layer(c) - b.layer(c)).cwiseAbs().maxCoeff());
  return m;
}

Outcome guidance_algebra() {
  bool ok = true;
  {
    LogitQuadruple q{LogitTensor(1, 1, 1), LogitTensor(1, 1, 1), LogitTensor(1, 1, 1), LogitTensor(1, 1, 1)};
    q.full.layer(0)(0, 0) = 2.0;
    q.spk.layer(0)(0, 0) = 1.5;
    q.ling.layer(0)(0, 0) = 1.0;
    q.null.layer(0)(0, 0) = 0.5;
    ok = ok && std::abs(combine(q, {1.5, 1.0, 1.0}).layer(0)(0, 0) - 3.5) < 1e-12;
    ok = ok && combine(q, {0, 0, 0}).layer(0)(0, 0) == 1.0;
  }
  Rng rng(404);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int T = 1 + static_cast<int>(rng.uniform_int(6));
    const int C = 1 + static_cast<int>(rng.uniform_int(4));
    const int K = 2 + static_cast<int>(rng.uniform_int(10));
    auto rq = [&] {
      return LogitQuadruple{random_tensor(T, C, K, rng), random_tensor(T, C, K, rng),
                            random_tensor(T, C, K, rng), random_tensor(T, C, K, rng)};
    };
    const LogitQuadruple q1 = rq(), q2 = rq();
    const GuidanceWeights w{rng.normal() * 2, rng.normal() * 2, rng.normal() * 2};

    // All-equal tensors reproduce themselves.
    const LogitQuadruple same{q1.full, q1.full, q1.full, q1.full};
    worst = std::max(worst, max_diff(combine(same, w), q1.full));
    // Identity weights return the full tensor.
    worst = std::max(worst, max_diff(combine(q1, {1, 0, 0}), q1.full));
    // Direct elementwise evaluation.
    const LogitTensor out = combine(q1, w);
    for (int c = 0; c < C; ++c) {
      const Mat direct = q1.ling.layer(c) + w.w_all * (q1.full.layer(c) - q1.ling.layer(c)) +
                         w.w_spk * (q1.spk.layer(c) - q1.ling.layer(c)) +
                         w.w_ling * (q1.ling.layer(c) - q1.null.layer(c));
      worst = std::max(worst, (out.layer(c) - direct).cwiseAbs().maxCoeff());
    }
    // Linearity in the four tensors.
    const double a = rng.normal(), b = rng.normal();
    LogitQuadruple mix = q1;
    for (int c = 0; c < C; ++c) {
      mix.full.layer(c) = a * q1.full.layer(c) + b * q2.full.layer(c);
      mix.spk.layer(c) = a * q1.spk.layer(c) + b * q2.spk.layer(c);
      mix.ling.layer(c) = a * q1.ling.layer(c) + b * q2.ling.layer(c);
      mix.null.layer(c) = a * q1.null.layer(c) + b * q2.null.layer(c);
    }
    const LogitTensor o2 = combine(q2, w);
    LogitTensor lin = out;
    for (int c = 0; c < C; ++c) lin.layer(c) = a * out.layer(c) + b * o2.layer(c);
    worst = std::max(worst, max_diff(combine(mix, w), lin));
    // Adding one constant per row to every tensor keeps the argmax.
    LogitQuadruple shifted = q1;
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T; ++t) {
        const double s = 5.0 * rng.normal();
        shifted.full.layer(c).row(t).array() += s;
        shifted.spk.layer(c).row(t).array() += s;
        shifted.ling.layer(c).row(t).array() += s;
        shifted.null.layer(c).row(t).array() += s;
      }
    const LogitTensor so = combine(shifted, w);
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T; ++t) {
        Eigen::Index i1, i2;
        out.layer(c).row(t).maxCoeff(&i1);
        so.layer(c).row(t).maxCoeff(&i2);
        if (i1 != i2) ok = false;
      }
  }
  ok = ok && worst < 1e-9;
  return {ok, "max deviation " + fmt(worst, 3) + " over 100 random tensors"};
}

// 5. Loss exclusivity.
Outcome loss_exclusivity() {
  Rng rng(505);
  bool ok = true;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int T = 1 + static_cast<int>(rng.uniform_int(40));
    const int C = 2 + static_cast<int>(rng.uniform_int(8));
    const int K = 2 + static_cast<int>(rng.uniform_int(30));
    const LogitTensor z = random_tensor(T, C, K, rng);
    TokenGrid g(T, C, K);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) g.set(t, c, static_cast<int>(rng.uniform_int(K)));
    const MaskingDraw draw = draw_training_mask(T, C, rng);
    const LayeredMask mask(T, C, draw.target_layer, draw.keep_row);
    LogitTensor z2 = z;
    TokenGrid g2 = g;
    std::set<std::pair<int, int>> positions;
    for (auto p : masked_positions(mask)) positions.insert(p);
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        if (!positions.contains({t, c})) {
          for (int k = 0; k < K; ++k) z2.layer(c)(t, k) = 10.0 * rng.normal();
          g2.set(t, c, static_cast<int>(rng.uniform_int(K)));
        }
    if (masked_loss(z, g, mask).loss != masked_loss(z2, g2, mask).loss) ok = false;
    worst = std::max(worst, max_diff(masked_loss_gradient(z, g, mask), masked_loss_gradient(z2, g2, mask)));
  }
  ok = ok && worst <= 1e-12;
  return {ok, "losses identical; max gradient deviation " + fmt(worst, 3)};
}

// 6. Finite-difference gradient check.
Outcome gradient_check() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.heads = 4;
  cfg.d_model = 32;
  cfg.d_ffn = 64;
  cfg.codebooks = 2;
  cfg.vocab = 8;
  cfg.dropout = 0.1;
  cfg.layer_drop = 0.1;
  ParamStore params;
  add_encoder_params(params, cfg);
  init_params(params, 606);
  Rng spread(607);
  for (auto& e : params.entries())
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += 0.2 * spread.normal();
  const int prompt = 4, total = 12;
  Rng data(608);
  Mat x(total, cfg.d_model);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = data.normal();
  std::vector<Mat> proj;
  for (int c = 0; c < cfg.codebooks; ++c) {
    Mat w(total - prompt, cfg.vocab);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = data.normal();
    proj.push_back(w);
  }
  auto scalar = [&](const LogitTensor& z) {
    double s = 0.0;
    for (int c = 0; c < cfg.codebooks; ++c) s += (z.layer(c).array() * proj[c].array()).sum();
    return s;
  };

  double worst = 0.0;
  int checked = 0;
  for (bool train : {false, true}) {
    auto run = [&](ForwardCache* cache) {
      Rng rng(609);
      return forward(params, cfg, x, prompt, train, &rng, cache);
    };
    ForwardCache cache;
    const LogitTensor z = run(&cache);
    LogitTensor dz(z.frames(), z.codebooks(), z.vocab());
    for (int c = 0; c < cfg.codebooks; ++c) dz.layer(c) = proj[c];
    ParamStore grads = params.zeros_like();
    backward(params, cfg, cache, dz, grads);
    Rng pick(train ? 611 : 610);
    for (int n = 0; n < 50; ++n) {
      const std::size_t i = pick.uniform_int(params.total_size());
      const double fd = mt::central_difference(params, i, [&] { return scalar(run(nullptr)); }, 1e-4);
      worst = std::max(worst, mt::relative_error(grads.flat(i), fd));
      ++checked;
    }
  }
  return {worst < 1e-4, std::to_string(checked) + " coordinates (eval and train mode), worst relative error " +
                            fmt(worst, 3)};
}

// 7. Sampler against the exact oracle.
Outcome sampler_oracle() {
  mt::TinySetup setup(1, 3, 2, 2);
  const CodecModel model = setup.model(707, 0.1);
  const mt::MemoizedModel memo(model);
  const ConditionBundle bundle = setup.bundle(7);
  SamplerConfig cfg;
  cfg.step_budget = StepBudget({2});
  cfg.weights = kAllModeWeights;
  cfg.top_k = 35;
  cfg.top_p = 0.9;
  const auto exact = exact_output_distribution(memo, bundle, 2, cfg);
  std::map<std::vector<int>, double> empirical;
  const int runs = 200000;
  for (int i = 0; i < runs; ++i) {
    cfg.seed = static_cast<std::uint64_t>(i);
    empirical[generate(bundle, 2, cfg, memo).data()] += 1.0 / runs;
  }
  const double tv = total_variation(exact, empirical);
  return {tv < 0.01 && exact.size() >= 4, "TV distance " + fmt(tv, 4) + " over " + std::to_string(runs) + " runs, " +
                         std::to_string(exact.size()) + " reachable outputs"};
}

// 8. Gumbel selection law.
Outcome gumbel_law() {
  Rng rng(808);
  double worst = 0.0;
  for (auto [a, b] : {std::pair{0.0, -10.0}, std::pair{0.3, -0.4}, std::pair{-1.0, 1.0}}) {
    const std::vector<double> conf{a, b};
    long first = 0;
    const int trials = 200000;
    for (int n = 0; n < trials; ++n) first += select_positions(conf, 1, rng)[0] == 0;
    const double expected = 1.0 / (1.0 + std::exp(b - a));
    worst = std::max(worst, std::abs(static_cast<double>(first) / trials - expected));
  }
  return {worst < 0.005, "max frequency deviation " + fmt(worst, 3) + " (3 confidence pairs, 200000 trials each)"};
}

// 9 and 10 share one trained model.
constexpr int kTrainSteps = 8000;
constexpr double kLearningRate = 2e-3;
constexpr int kHeldOut = 500;

struct Trained {
  std::optional<CodecModel> model;
  double seconds = 0.0;
  double accuracy_discrete = 0.0;
  double accuracy_continuous = 0.0;
};

Trained train_desk_model() {
  const SynthWorld world(WorldSpec{});
  ModelConfig mc;
  mc.dropout = 0.0;
  mc.layer_drop = 0.0;
  Trained out;
  out.model.emplace(mc, 1);
  TrainConfig tc;
  tc.learning_rate = kLearningRate;
  tc.seed = 3;
  AdamW opt(out.model->params(), tc);
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t next = 0;
  std::vector<TrainingExample> batch(tc.batch_size);
  for (int step = 0; step < kTrainSteps; ++step) {
    for (auto& ex : batch) ex = world.sample(next++).example;
    train_step(*out.model, opt, batch, tc, static_cast<std::uint64_t>(step));
  }
  out.seconds = seconds_since(t0);
  std::vector<TrainingExample> held;
  for (int i = 0; i < kHeldOut; ++i) held.push_back(world.sample(500'000'000 + i).example);
  out.accuracy_discrete = masked_accuracy(*out.model, held, 99, DropMode::all, false).accuracy();
  out.accuracy_continuous = masked_accuracy(*out.model, held, 99, DropMode::all, true).accuracy();
  return out;
}

Outcome desk_training(const Trained& t) {
  const bool ok = t.accuracy_discrete >= 0.9 && t.accuracy_continuous >= 0.9 && t.seconds <= 600.0;
  return {ok, std::to_string(kTrainSteps) + " steps in " + fmt(t.seconds, 4) + " s; held-out accuracy " +
                  fmt(t.accuracy_discrete, 4) + " (discrete), " + fmt(t.accuracy_continuous, 4) +
                  " (continuous)"};
}

Outcome cfg_direction(const Trained& t) {
  const SynthWorld world(WorldSpec{});
  const std::vector<ProbeSetting> settings{
      {"spk_w2", {0.0, 2.0, 0.5}, false, false},
      {"spk_w0", {0.0, 0.0, 0.5}, false, false},
      {"all_pitch", kAllModeWeights, true, true},
      {"all_no_pitch", kAllModeWeights, false, true},
  };
  ProbeOptions opt;
  opt.generations = 500;
  opt.seed = 1010;
  const auto r = cfg_probe(*t.model, world, settings, opt);
  const double p_spk = stats::welch_greater_pvalue(r[0].speaker_rates, r[1].speaker_rates);
  const double p_fpc = stats::welch_greater_pvalue(r[2].fpc_values, r[3].fpc_values);
  const bool ok = r[0].speaker_rate() > r[1].speaker_rate() && p_spk < 0.01 &&
                  r[2].mean_fpc() > r[3].mean_fpc() && p_fpc < 0.01;
  return {ok, "speaker rate " + fmt(r[0].speaker_rate(), 4) + " vs " + fmt(r[1].speaker_rate(), 4) +
                  " (p=" + fmt(p_spk, 3) + "); FPC " + fmt(r[2].mean_fpc(), 4) + " vs " +
                  fmt(r[3].mean_fpc(), 4) + " (p=" + fmt(p_fpc, 3) + "), 500 generations each"};
}

// 11. CLI determinism.
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_command(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome convert_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no CLI path given"};
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path data = work / "data";
  if (run_command(cli + " make-synth-data --out " + data.string() + " --count 40") != 0)
    return {false, "make-synth-data failed"};
  io::json cfg = {
      {"model", io::to_json(ModelConfig{})},
      {"train", {{"steps", 30}, {"batch_size", 8}, {"learning_rate", 2e-3}, {"seed", 5}}},
      {"data", {{"dir", data.string()}}},
      {"output", {{"dir", (work / "run").string()}, {"checkpoint_every", 0}}},
  };
  io::write_json(work / "train.json", cfg);
  if (run_command(cli + " train " + (work / "train.json").string()) != 0) return {false, "train failed"};
  const fs::path ckpt = work / "run" / "checkpoint_final.json";
  const fs::path ex = data / "sample_000000";
  bool ok = true;
  std::string detail;
  for (std::string mode : {"spk", "all"}) {
    std::vector<std::string> outputs;
    int idx = 0;
    for (int threads : {1, 1, 4}) {
      const fs::path out = work / ("out_" + mode + "_" + std::to_string(idx++));
      std::string cmd = cli + " convert --checkpoint " + ckpt.string() + " --mode " + mode +
                        " --source-ling " + (ex / (mode == "all" ? "source_ling_continuous.json" : "source_ling_discrete.json")).string() +
                        " --prompt " + (ex / "prompt_tokens.json").string() +
                        " --prompt-ling " + (ex / (mode == "all" ? "prompt_ling_continuous.json" : "prompt_ling_discrete.json")).string() +
                        " --prompt-pitch " + (ex / "prompt_pitch.json").string() +
                        " --frames 32 --seed 77 --threads " + std::to_string(threads) + " --out " + out.string();
      if (mode == "all") cmd += " --source-pitch " + (ex / "source_pitch.json").string();
      if (run_command(cmd) != 0) return {false, "convert --mode " + mode + " failed"};
      std::string bytes;
      for (const auto& entry : fs::directory_iterator(out)) bytes += entry.path().filename().string() + ":" + slurp(entry.path());
      outputs.push_back(bytes);
    }
    const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2] && !outputs[0].empty();
    ok = ok && same;
    detail += "mode " + mode + (same ? " identical" : " differs") + "; ";
  }
  return {ok, detail + "two runs at 1 thread and one at 4 threads"};
}

// 12. Drop-mode and target-layer frequencies.
Outcome sampling_fidelity() {
  const int draws = 110000;
  Rng rng(1212);
  std::vector<long> modes(4, 0);
  for (int n = 0; n < draws; ++n) ++modes[static_cast<int>(sample_drop_mode(rng))];
  const std::vector<double> ratios(kDefaultDropRatios.begin(), kDefaultDropRatios.end());
  const double p_modes = stats::chi_square_pvalue(modes, ratios);
  double p_layers_min = 1.0;
  for (int C : {3, 9}) {
    std::vector<long> layers(C, 0);
    for (int n = 0; n < draws; ++n) ++layers[draw_training_mask(8, C, rng).target_layer];
    p_layers_min = std::min(p_layers_min, stats::chi_square_pvalue(layers, layer_distribution(C)));
  }
  const bool ok = p_modes >= 0.01 && p_layers_min >= 0.01;
  return {ok, "drop modes p=" + fmt(p_modes, 3) + ", target layers (C=3, C=9) min p=" + fmt(p_layers_min, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maskvct acceptance suite"};
  std::string cli;
  std::string workdir = (fs::temp_directory_path() / "maskvct_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the maskvct executable");
  app.add_option("--workdir", workdir, "Scratch directory for CLI runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
  std::optional<Trained> trained;
  auto need_model = [&]() -> const Trained& {
    if (!trained) trained = train_desk_model();
    return *trained;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"pitch embedding numerics", pitch_numerics},
      {"schedule laws", schedule_laws},
      {"mask structure", mask_structure},
      {"guidance algebra", guidance_algebra},
      {"masked loss exclusivity", loss_exclusivity},
      {"gradient correctness", gradient_check},
      {"sampler oracle", sampler_oracle},
      {"Gumbel selection law", gumbel_law},
      {"desk-scale training", [&] { return desk_training(need_model()); }},
      {"guidance behavioral direction", [&] { return cfg_direction(need_model()); }},
      {"convert determinism", [&] { return convert_determinism(cli, workdir); }},
      {"drop-mode and layer sampling fidelity", sampling_fidelity},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!wanted(number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << criteria[i].first
              << "): " << o.detail << " [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
