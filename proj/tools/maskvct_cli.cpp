#include "maskvct/eval.hpp"
#include "maskvct/io.hpp"
#include "maskvct/sampler.hpp"
#include "maskvct/synth_world.hpp"
#include "maskvct/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifndef MASKVCT_VERSION
#define MASKVCT_VERSION "0.0.0"
#endif

using namespace maskvct;
namespace fs = std::filesystem;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return io::fnv1a_hex(ss.str());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

std::string checkpoint_name(long step) {
  std::ostringstream os;
  os << "checkpoint_" << std::setw(6) << std::setfill('0') << step << ".json";
  return os.str();
}

json versions() {
  return {{"maskvct", MASKVCT_VERSION}, {"checkpoint_format", io::kCheckpointVersion}};
}

// train ---------------------------------------------------------------------

int cmd_train(const fs::path& config_path) {
  require_file(config_path, "config file");
  const json doc = io::read_json(config_path);
  io::require_known_keys(doc, {"model", "train", "data", "output"}, "run config");
  for (const char* section : {"model", "train", "data", "output"})
    if (!doc.contains(section)) throw UsageError(std::string("run config: missing section ") + section);
  const ModelConfig mc = io::model_config_from_json(doc.at("model"));
  const TrainConfig tc = io::train_config_from_json(doc.at("train"));
  const json& data = doc.at("data");
  io::require_known_keys(data, {"dir"}, "data section");
  const json& output = doc.at("output");
  io::require_known_keys(output, {"dir", "checkpoint_every"}, "output section");
  const fs::path data_dir = data.at("dir").get<std::string>();
  const fs::path out_dir = output.at("dir").get<std::string>();
  const long every = output.value("checkpoint_every", 0L);
  if (every < 0) throw UsageError("output section: checkpoint_every must be >= 0");
  if (!fs::is_directory(data_dir)) throw UsageError("data directory not found: " + data_dir.string());

  const io::Dataset ds = io::read_dataset(data_dir);
  if (ds.examples.empty()) throw UsageError("data directory holds no samples");
  if (ds.world.vocab != mc.vocab || ds.world.codebooks != mc.codebooks ||
      ds.world.ling_vocab != mc.ling_vocab || ds.world.ling_dim != mc.ling_dim)
    throw UsageError("model config does not match the data (vocab, codebooks, ling_vocab, ling_dim)");

  fs::create_directories(out_dir);
  CodecModel model(mc, tc.seed);
  AdamW opt(model.params(), tc);
  std::ofstream loss_csv(out_dir / "loss.csv");
  loss_csv << "step,loss\n" << std::setprecision(10);

  const std::size_t n = ds.examples.size();
  std::vector<TrainingExample> batch(tc.batch_size);
  for (int step = 0; step < tc.steps; ++step) {
    for (int i = 0; i < tc.batch_size; ++i)
      batch[i] = ds.examples[(static_cast<std::size_t>(step) * tc.batch_size + i) % n];
    const StepResult r = train_step(model, opt, batch, tc, static_cast<std::uint64_t>(step));
    loss_csv << step + 1 << ',' << r.loss << '\n';
    if (every > 0 && (step + 1) % every == 0) io::save_checkpoint(out_dir / checkpoint_name(step + 1), model, step + 1);
  }
  loss_csv.flush();
  io::save_checkpoint(out_dir / "checkpoint_final.json", model, tc.steps);

  const json config = {{"model", io::to_json(mc)}, {"train", io::to_json(tc)}, {"data", data}, {"output", output}};
  io::write_json(out_dir / "manifest.json",
                 {{"command", "train"},
                  {"config", config},
                  {"config_hash", io::fnv1a_hex(config.dump())},
                  {"seed", tc.seed},
                  {"data_manifest_hash", file_digest(data_dir / "manifest.json")},
                  {"final_checkpoint", "checkpoint_final.json"},
                  {"versions", versions()}});
  std::cout << "trained " << tc.steps << " steps; wrote " << (out_dir / "checkpoint_final.json").string() << '\n';
  return kExitOk;
}

// convert -------------------------------------------------------------------

struct ConvertArgs {
  std::string checkpoint, source_ling, source_pitch, prompt, prompt_ling, prompt_pitch, out;
  std::string mode = "all";
  std::optional<double> w_all, w_spk, w_ling;
  int top_k = 35;
  double top_p = 0.9;
  std::vector<int> steps_per_layer;
  std::uint64_t seed = 0;
  int threads = 1;
  int frames = 0;
};

ConditionBundle load_bundle(const std::string& source_ling, const std::string& source_pitch,
                            const std::string& prompt, const std::string& prompt_ling,
                            const std::string& prompt_pitch, bool use_pitch) {
  require_file(source_ling, "source linguistic file");
  require_file(prompt, "prompt token file");
  require_file(prompt_ling, "prompt linguistic file");
  ConditionBundle b;
  b.ling = io::linguistic_from_json(io::read_json(source_ling));
  b.prompt = io::token_grid_from_json(io::read_json(prompt));
  b.prompt_ling = io::linguistic_from_json(io::read_json(prompt_ling));
  if (b.prompt_ling.mode != b.ling.mode)
    throw UsageError("source and prompt linguistic files use different modes");
  if (!prompt_pitch.empty()) {
    require_file(prompt_pitch, "prompt pitch file");
    b.prompt_pitch = io::pitch_from_json(io::read_json(prompt_pitch));
  }
  if (use_pitch) {
    require_file(source_pitch, "source pitch file");
    b.pitch = io::pitch_from_json(io::read_json(source_pitch));
  }
  return b;
}

int cmd_convert(const ConvertArgs& a) {
  const bool all_mode = a.mode == "all";
  if (all_mode && a.source_pitch.empty()) throw UsageError("--mode all requires --source-pitch");
  require_file(a.checkpoint, "checkpoint");
  const io::LoadedCheckpoint ck = io::load_checkpoint(a.checkpoint);
  const ModelConfig& mc = ck.model.config();

  ConditionBundle bundle = load_bundle(a.source_ling, a.source_pitch, a.prompt, a.prompt_ling,
                                       a.prompt_pitch, all_mode);
  const LinguisticMode expected = all_mode ? LinguisticMode::continuous : LinguisticMode::discrete;
  if (bundle.ling.mode != expected)
    throw UsageError(std::string("--mode ") + a.mode + " expects " +
                     (all_mode ? "continuous" : "discrete") + " linguistic files");

  int frames = a.frames;
  if (bundle.pitch) {
    if (frames == 0) frames = bundle.pitch->frames();
    if (frames != bundle.pitch->frames()) throw UsageError("--frames differs from the source pitch length");
  }
  if (frames <= 0) throw UsageError("--frames is required when no source pitch is given");

  SamplerConfig sc;
  sc.step_budget = a.steps_per_layer.empty() ? StepBudget::default_for(mc.codebooks) : StepBudget(a.steps_per_layer);
  sc.top_k = a.top_k;
  sc.top_p = a.top_p;
  sc.seed = a.seed;
  sc.weights = all_mode ? kAllModeWeights : kSpkModeWeights;
  if (a.w_all) sc.weights.w_all = *a.w_all;
  if (a.w_spk) sc.weights.w_spk = *a.w_spk;
  if (a.w_ling) sc.weights.w_ling = *a.w_ling;
  sc.pitch_conditioned = all_mode;
  sc.threads = a.threads;
  sc.validate(mc.codebooks);

  const TokenGrid out = generate(bundle, frames, sc, ck.model);

  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  io::write_json(out_dir / "tokens.json", io::to_json(out));
  json inputs = {{"checkpoint", {{"path", a.checkpoint}, {"hash", file_digest(a.checkpoint)}}},
                 {"source_ling", {{"path", a.source_ling}, {"hash", file_digest(a.source_ling)}}},
                 {"prompt", {{"path", a.prompt}, {"hash", file_digest(a.prompt)}}},
                 {"prompt_ling", {{"path", a.prompt_ling}, {"hash", file_digest(a.prompt_ling)}}}};
  if (all_mode) inputs["source_pitch"] = {{"path", a.source_pitch}, {"hash", file_digest(a.source_pitch)}};
  if (!a.prompt_pitch.empty())
    inputs["prompt_pitch"] = {{"path", a.prompt_pitch}, {"hash", file_digest(a.prompt_pitch)}};
  const json config = {{"mode", a.mode},
                       {"weights", {{"w_all", sc.weights.w_all}, {"w_spk", sc.weights.w_spk}, {"w_ling", sc.weights.w_ling}}},
                       {"pitch_conditioned", sc.pitch_conditioned},
                       {"top_k", sc.top_k},
                       {"top_p", sc.top_p},
                       {"steps_per_layer", sc.step_budget.steps_per_layer()},
                       {"frames", frames},
                       {"seed", sc.seed}};
  io::write_json(out_dir / "manifest.json",
                 {{"command", "convert"},
                  {"config", config},
                  {"config_hash", io::fnv1a_hex(config.dump())},
                  {"seed", sc.seed},
                  {"inputs", inputs},
                  {"output", "tokens.json"},
                  {"versions", versions()}});
  std::cout << "wrote " << (out_dir / "tokens.json").string() << '\n';
  return kExitOk;
}

// eval ----------------------------------------------------------------------

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw UsageError("cannot write " + out);
  f << text;
}

int cmd_eval_fpc(const std::string& a_path, const std::string& b_path, const std::string& out) {
  require_file(a_path, "pitch file");
  require_file(b_path, "pitch file");
  const FpcReport r = fpc(io::pitch_from_json(io::read_json(a_path)), io::pitch_from_json(io::read_json(b_path)));
  std::ostringstream os;
  os << std::setprecision(10) << "fpc,voiced_frames\n" << r.fpc << ',' << r.voiced_frames_used << '\n';
  emit(os.str(), out);
  return kExitOk;
}

struct OracleArgs {
  std::string checkpoint, example, out, mode = "spk";
  int frames = 2;
  int runs = 20000;
  std::uint64_t seed = 0;
  std::vector<int> steps_per_layer;
  int top_k = 35;
  double top_p = 0.9;
};

std::string key_string(const std::vector<int>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) s += (i ? " " : "") + std::to_string(tokens[i]);
  return s;
}

int cmd_eval_oracle(const OracleArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  const io::LoadedCheckpoint ck = io::load_checkpoint(a.checkpoint);
  const bool all_mode = a.mode == "all";
  const fs::path ex = a.example;
  const std::string kind = all_mode ? "continuous" : "discrete";
  ConditionBundle bundle =
      load_bundle((ex / ("source_ling_" + kind + ".json")).string(), (ex / "source_pitch.json").string(),
                  (ex / "prompt_tokens.json").string(), (ex / ("prompt_ling_" + kind + ".json")).string(),
                  (ex / "prompt_pitch.json").string(), all_mode);
  if (bundle.pitch) {
    if (bundle.pitch->frames() < a.frames) throw UsageError("--frames exceeds the source length");
    bundle.pitch->f0_hz.resize(a.frames);
  }
  SamplerConfig sc;
  sc.step_budget = a.steps_per_layer.empty() ? StepBudget(std::vector<int>(ck.model.codebooks(), a.frames))
                                             : StepBudget(a.steps_per_layer);
  sc.top_k = a.top_k;
  sc.top_p = a.top_p;
  sc.weights = all_mode ? kAllModeWeights : kSpkModeWeights;
  sc.pitch_conditioned = all_mode;
  sc.validate(ck.model.codebooks());
  std::map<std::vector<int>, double> exact;
  try {
    exact = exact_output_distribution(ck.model, bundle, a.frames, sc);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  std::map<std::vector<int>, double> empirical;
  for (int i = 0; i < a.runs; ++i) {
    sc.seed = a.seed + static_cast<std::uint64_t>(i);
    empirical[generate(bundle, a.frames, sc, ck.model).data()] += 1.0 / a.runs;
  }
  std::set<std::vector<int>> keys;
  for (const auto& [k, v] : exact) keys.insert(k);
  for (const auto& [k, v] : empirical) keys.insert(k);
  std::ostringstream os;
  os << std::setprecision(10) << "tokens,exact,empirical\n";
  for (const auto& k : keys)
    os << key_string(k) << ',' << (exact.contains(k) ? exact.at(k) : 0.0) << ','
       << (empirical.contains(k) ? empirical.at(k) : 0.0) << '\n';
  emit(os.str(), a.out);
  std::cerr << "total variation " << total_variation(exact, empirical) << " over " << a.runs << " runs\n";
  return kExitOk;
}

struct ProbeArgs {
  std::string checkpoint, data, out;
  int generations = 500;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;
  int threads = 1;
};

int cmd_eval_probe(const ProbeArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  const io::LoadedCheckpoint ck = io::load_checkpoint(a.checkpoint);
  const ModelConfig& mc = ck.model.config();
  WorldSpec spec;
  if (!a.data.empty()) {
    require_file(fs::path(a.data) / "manifest.json", "data manifest");
    spec = io::world_spec_from_json(io::read_json(fs::path(a.data) / "manifest.json").at("world"));
  } else {
    spec.seed = a.world_seed;
  }
  if (spec.vocab != mc.vocab || spec.codebooks != mc.codebooks || spec.ling_vocab != mc.ling_vocab ||
      spec.ling_dim != mc.ling_dim)
    throw UsageError("checkpoint does not match the synthetic world");
  const SynthWorld world(spec);
  const std::vector<ProbeSetting> settings{
      {"all", kAllModeWeights, true, true},
      {"all_no_pitch", kAllModeWeights, false, true},
      {"spk", kSpkModeWeights, false, false},
      {"spk_w_spk_0", {0.0, 0.0, 0.5}, false, false},
      {"accent", {0.0, 2.5, 0.5}, false, false},
      {"unguided", {0.0, 0.0, 0.0}, false, false},
  };
  ProbeOptions opt;
  opt.generations = a.generations;
  opt.seed = a.seed;
  opt.step_budget = StepBudget::default_for(mc.codebooks);
  opt.threads = a.threads;
  const auto results = cfg_probe(ck.model, world, settings, opt);
  emit(probe_csv(results), a.out);
  return kExitOk;
}

// make-synth-data -------------------------------------------------------------

int cmd_make_data(const std::string& out, int count, std::uint64_t seed, int source_frames, int prompt_frames) {
  if (count < 1) throw UsageError("--count must be >= 1");
  WorldSpec spec;
  spec.seed = seed;
  spec.source_frames = source_frames;
  spec.prompt_frames = prompt_frames;
  const SynthWorld world(spec);
  io::write_dataset(out, world, count);
  std::cout << "wrote " << count << " samples to " << out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked codec-token voice conversion toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MASKVCT_VERSION);

  std::string train_config;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("config", train_config, "Run config (JSON)")->required();

  ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "Generate a token grid for a source utterance and speaker prompt");
  convert->add_option("--checkpoint", conv.checkpoint)->required();
  convert->add_option("--source-ling", conv.source_ling, "Source linguistic features")->required();
  convert->add_option("--source-pitch", conv.source_pitch, "Source pitch contour");
  convert->add_option("--prompt", conv.prompt, "Prompt token grid")->required();
  convert->add_option("--prompt-ling", conv.prompt_ling, "Prompt linguistic features")->required();
  convert->add_option("--prompt-pitch", conv.prompt_pitch, "Prompt pitch contour");
  convert->add_option("--mode", conv.mode, "Preset")->check(CLI::IsMember({"all", "spk"}));
  convert->add_option("--w-all", conv.w_all);
  convert->add_option("--w-spk", conv.w_spk);
  convert->add_option("--w-ling", conv.w_ling);
  convert->add_option("--top-k", conv.top_k);
  convert->add_option("--top-p", conv.top_p);
  convert->add_option("--steps-per-layer", conv.steps_per_layer, "One step count per codebook layer")->delimiter(',');
  convert->add_option("--seed", conv.seed);
  convert->add_option("--threads", conv.threads);
  convert->add_option("--frames", conv.frames, "Output length (defaults to the source pitch length)");
  convert->add_option("--out", conv.out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluation tools");
  eval->require_subcommand(1);
  std::string fpc_a, fpc_b, fpc_out;
  auto* eval_fpc = eval->add_subcommand("fpc", "Pitch-contour correlation of two contours");
  eval_fpc->add_option("--generated", fpc_a)->required();
  eval_fpc->add_option("--reference", fpc_b)->required();
  eval_fpc->add_option("--out", fpc_out, "CSV path (stdout when omitted)");

  OracleArgs orc;
  auto* eval_oracle = eval->add_subcommand("oracle", "Compare the sampler with its exact output distribution");
  eval_oracle->add_option("--checkpoint", orc.checkpoint)->required();
  eval_oracle->add_option("--example", orc.example, "Example directory from make-synth-data")->required();
  eval_oracle->add_option("--frames", orc.frames);
  eval_oracle->add_option("--runs", orc.runs);
  eval_oracle->add_option("--seed", orc.seed);
  eval_oracle->add_option("--mode", orc.mode)->check(CLI::IsMember({"all", "spk"}));
  eval_oracle->add_option("--steps-per-layer", orc.steps_per_layer)->delimiter(',');
  eval_oracle->add_option("--top-k", orc.top_k);
  eval_oracle->add_option("--top-p", orc.top_p);
  eval_oracle->add_option("--out", orc.out, "CSV path (stdout when omitted)");

  ProbeArgs prb;
  auto* eval_probe = eval->add_subcommand("cfg-probe", "Condition-consistency rates across guidance settings");
  eval_probe->add_option("--checkpoint", prb.checkpoint)->required();
  eval_probe->add_option("--data", prb.data, "Data directory whose world spec to use");
  eval_probe->add_option("--world-seed", prb.world_seed);
  eval_probe->add_option("--generations", prb.generations);
  eval_probe->add_option("--seed", prb.seed);
  eval_probe->add_option("--threads", prb.threads);
  eval_probe->add_option("--out", prb.out, "CSV path (stdout when omitted)");

  std::string data_out;
  int data_count = 0, source_frames = WorldSpec{}.source_frames, prompt_frames = WorldSpec{}.prompt_frames;
  std::uint64_t data_seed = 0;
  auto* make_data = app.add_subcommand("make-synth-data", "Write a synthetic dataset");
  make_data->add_option("--out", data_out)->required();
  make_data->add_option("--count", data_count)->required();
  make_data->add_option("--seed", data_seed);
  make_data->add_option("--source-frames", source_frames);
  make_data->add_option("--prompt-frames", prompt_frames);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_config);
    if (*convert) return cmd_convert(conv);
    if (*eval_fpc) return cmd_eval_fpc(fpc_a, fpc_b, fpc_out);
    if (*eval_oracle) return cmd_eval_oracle(orc);
    if (*eval_probe) return cmd_eval_probe(prb);
    if (*make_data) return cmd_make_data(data_out, data_count, data_seed, source_frames, prompt_frames);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "undefined metric: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
