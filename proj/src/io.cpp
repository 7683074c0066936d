#include "maskvct/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace maskvct::io {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto guarded(const std::string& context, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(context + ": " + e.what());
  }
}

}  // namespace

void require_known_keys(const json& doc, std::initializer_list<const char*> allowed,
                        const std::string& context) {
  if (!doc.is_object()) throw FormatError(context + ": expected an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : doc.items())
    if (!names.contains(item.key())) throw FormatError(context + ": unknown key '" + item.key() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

json to_json(const TokenGrid& grid) {
  json rows = json::array();
  for (int t = 0; t < grid.frames(); ++t) {
    json row = json::array();
    for (int c = 0; c < grid.codebooks(); ++c) row.push_back(grid.at(t, c));
    rows.push_back(std::move(row));
  }
  return {{"frame_rate_hz", grid.frame_rate_hz()},
          {"vocab_size", grid.vocab_size()},
          {"num_codebooks", grid.codebooks()},
          {"tokens", std::move(rows)}};
}

TokenGrid token_grid_from_json(const json& doc) {
  return guarded("token grid", [&] {
    require_known_keys(doc, {"frame_rate_hz", "vocab_size", "num_codebooks", "tokens"}, "token grid");
    const double rate = doc.at("frame_rate_hz").get<double>();
    const int vocab = doc.at("vocab_size").get<int>();
    const int codebooks = doc.at("num_codebooks").get<int>();
    const auto& rows = doc.at("tokens");
    if (!rows.is_array() || rows.empty()) throw FormatError("token grid: tokens must be a non-empty array");
    std::vector<int> flat;
    for (const auto& row : rows) {
      if (!row.is_array() || static_cast<int>(row.size()) != codebooks)
        throw FormatError("token grid: every frame must list num_codebooks tokens");
      for (const auto& v : row) {
        if (!v.is_number_integer()) throw FormatError("token grid: token ids must be integers");
        flat.push_back(v.get<int>());
      }
    }
    return TokenGrid(std::move(flat), static_cast<int>(rows.size()), codebooks, vocab, rate);
  });
}

json to_json(const PitchContour& contour) {
  return {{"frame_rate_hz", contour.frame_rate_hz}, {"f0_hz", contour.f0_hz}};
}

PitchContour pitch_from_json(const json& doc) {
  return guarded("pitch contour", [&] {
    require_known_keys(doc, {"frame_rate_hz", "f0_hz"}, "pitch contour");
    PitchContour c;
    c.frame_rate_hz = doc.at("frame_rate_hz").get<double>();
    c.f0_hz = doc.at("f0_hz").get<std::vector<double>>();
    c.validate();
    return c;
  });
}

json to_json(const LinguisticSequence& seq) {
  json doc;
  if (seq.mode == LinguisticMode::discrete) {
    doc["mode"] = "discrete";
    doc["tokens"] = seq.tokens;
    doc["vocab_size"] = seq.vocab_size;
  } else {
    doc["mode"] = "continuous";
    json rows = json::array();
    for (Eigen::Index i = 0; i < seq.vectors.rows(); ++i) {
      std::vector<double> row(seq.vectors.cols());
      for (Eigen::Index j = 0; j < seq.vectors.cols(); ++j) row[j] = seq.vectors(i, j);
      rows.push_back(row);
    }
    doc["vectors"] = std::move(rows);
  }
  doc["frame_times"] = seq.frame_times;
  return doc;
}

LinguisticSequence linguistic_from_json(const json& doc) {
  return guarded("linguistic sequence", [&] {
    require_known_keys(doc, {"mode", "tokens", "vectors", "frame_times", "vocab_size"},
                       "linguistic sequence");
    LinguisticSequence seq;
    const auto mode = doc.at("mode").get<std::string>();
    seq.frame_times = doc.at("frame_times").get<std::vector<double>>();
    if (mode == "discrete") {
      if (doc.contains("vectors")) throw FormatError("linguistic sequence: discrete mode with vectors");
      seq.mode = LinguisticMode::discrete;
      seq.tokens = doc.at("tokens").get<std::vector<int>>();
      if (doc.contains("vocab_size")) {
        seq.vocab_size = doc.at("vocab_size").get<int>();
      } else {
        seq.vocab_size = 0;
        for (int t : seq.tokens) seq.vocab_size = std::max(seq.vocab_size, t + 1);
      }
    } else if (mode == "continuous") {
      if (doc.contains("tokens")) throw FormatError("linguistic sequence: continuous mode with tokens");
      seq.mode = LinguisticMode::continuous;
      const auto rows = doc.at("vectors").get<std::vector<std::vector<double>>>();
      const std::size_t width = rows.empty() ? 0 : rows.front().size();
      seq.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != width) throw FormatError("linguistic sequence: ragged vectors");
        for (std::size_t j = 0; j < width; ++j) seq.vectors(i, j) = rows[i][j];
      }
    } else {
      throw FormatError("linguistic sequence: mode must be 'discrete' or 'continuous'");
    }
    seq.validate();
    return seq;
  });
}

json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},         {"heads", c.heads},
          {"d_model", c.d_model},       {"d_ffn", c.d_ffn},
          {"codebooks", c.codebooks},   {"vocab", c.vocab},
          {"ling_vocab", c.ling_vocab}, {"ling_dim", c.ling_dim},
          {"dropout", c.dropout},       {"layer_drop", c.layer_drop}};
}

ModelConfig model_config_from_json(const json& doc) {
  return guarded("model config", [&] {
    require_known_keys(doc, {"layers", "heads", "d_model", "d_ffn", "codebooks", "vocab",
                             "ling_vocab", "ling_dim", "dropout", "layer_drop"},
                       "model config");
    ModelConfig c;
    c.layers = doc.value("layers", c.layers);
    c.heads = doc.value("heads", c.heads);
    c.d_model = doc.value("d_model", c.d_model);
    c.d_ffn = doc.value("d_ffn", c.d_ffn);
    c.codebooks = doc.value("codebooks", c.codebooks);
    c.vocab = doc.value("vocab", c.vocab);
    c.ling_vocab = doc.value("ling_vocab", c.ling_vocab);
    c.ling_dim = doc.value("ling_dim", c.ling_dim);
    c.dropout = doc.value("dropout", c.dropout);
    c.layer_drop = doc.value("layer_drop", c.layer_drop);
    c.validate();
    return c;
  });
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"drop_ratios", c.drop_ratios},
          {"continuous_ling_prob", c.continuous_ling_prob},
          {"spec_augment_fraction", c.spec_augment_fraction},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"threads", c.threads}};
}

TrainConfig train_config_from_json(const json& doc) {
  return guarded("train config", [&] {
    require_known_keys(doc, {"batch_size", "steps", "learning_rate", "seed", "drop_ratios",
                             "continuous_ling_prob", "spec_augment_fraction", "weight_decay",
                             "beta1", "beta2", "epsilon", "threads"},
                       "train config");
    TrainConfig c;
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.steps = doc.value("steps", c.steps);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("drop_ratios")) {
      const auto r = doc.at("drop_ratios").get<std::vector<double>>();
      if (r.size() != 4) throw FormatError("train config: drop_ratios needs four entries");
      std::copy(r.begin(), r.end(), c.drop_ratios.begin());
    }
    c.continuous_ling_prob = doc.value("continuous_ling_prob", c.continuous_ling_prob);
    c.spec_augment_fraction = doc.value("spec_augment_fraction", c.spec_augment_fraction);
    c.weight_decay = doc.value("weight_decay", c.weight_decay);
    c.beta1 = doc.value("beta1", c.beta1);
    c.beta2 = doc.value("beta2", c.beta2);
    c.epsilon = doc.value("epsilon", c.epsilon);
    c.threads = doc.value("threads", c.threads);
    c.validate();
    return c;
  });
}

json to_json(const WorldSpec& s) {
  return {{"vocab", s.vocab},
          {"codebooks", s.codebooks},
          {"ling_vocab", s.ling_vocab},
          {"n_speakers", s.n_speakers},
          {"pitch_buckets", s.pitch_buckets},
          {"ling_dim", s.ling_dim},
          {"ling_noise", s.ling_noise},
          {"source_frames", s.source_frames},
          {"prompt_frames", s.prompt_frames},
          {"seed", s.seed}};
}

WorldSpec world_spec_from_json(const json& doc) {
  return guarded("world spec", [&] {
    require_known_keys(doc, {"vocab", "codebooks", "ling_vocab", "n_speakers", "pitch_buckets",
                             "ling_dim", "ling_noise", "source_frames", "prompt_frames", "seed"},
                       "world spec");
    WorldSpec s;
    s.vocab = doc.value("vocab", s.vocab);
    s.codebooks = doc.value("codebooks", s.codebooks);
    s.ling_vocab = doc.value("ling_vocab", s.ling_vocab);
    s.n_speakers = doc.value("n_speakers", s.n_speakers);
    s.pitch_buckets = doc.value("pitch_buckets", s.pitch_buckets);
    s.ling_dim = doc.value("ling_dim", s.ling_dim);
    s.ling_noise = doc.value("ling_noise", s.ling_noise);
    s.source_frames = doc.value("source_frames", s.source_frames);
    s.prompt_frames = doc.value("prompt_frames", s.prompt_frames);
    s.seed = doc.value("seed", s.seed);
    s.validate();
    return s;
  });
}

void save_checkpoint(const fs::path& path, const CodecModel& model, long step) {
  json weights = json::array();
  for (const auto& e : model.params().entries()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(e.value.size()));
    for (Eigen::Index r = 0; r < e.value.rows(); ++r)
      for (Eigen::Index c = 0; c < e.value.cols(); ++c) data.push_back(e.value(r, c));
    weights.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}, {"data", data}});
  }
  json doc = {{"format", "maskvct-checkpoint"},
              {"version", kCheckpointVersion},
              {"step", step},
              {"config", to_json(model.config())},
              {"weights", std::move(weights)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  const json doc = read_json(path);
  return guarded("checkpoint", [&] {
    require_known_keys(doc, {"format", "version", "step", "config", "weights"}, "checkpoint");
    if (doc.at("format").get<std::string>() != "maskvct-checkpoint")
      throw FormatError("checkpoint: unexpected format tag");
    if (doc.at("version").get<int>() != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version");
    LoadedCheckpoint out{CodecModel(model_config_from_json(doc.at("config"))), doc.at("step").get<long>()};
    ParamStore& params = out.model.params();
    std::set<std::string> seen;
    for (const auto& w : doc.at("weights")) {
      const auto name = w.at("name").get<std::string>();
      if (!params.contains(name)) throw FormatError("checkpoint: unknown weight " + name);
      Mat& m = params.get(name);
      if (w.at("rows").get<long>() != m.rows() || w.at("cols").get<long>() != m.cols())
        throw FormatError("checkpoint: shape mismatch for " + name);
      const auto data = w.at("data").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(m.size()))
        throw FormatError("checkpoint: data length mismatch for " + name);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
      seen.insert(name);
    }
    if (seen.size() != params.entries().size()) throw FormatError("checkpoint: missing weights");
    return out;
  });
}

void write_example(const fs::path& dir, const TrainingExample& ex) {
  fs::create_directories(dir);
  write_json(dir / "source_tokens.json", to_json(ex.target));
  write_json(dir / "source_pitch.json", to_json(ex.pitch));
  write_json(dir / "source_ling_discrete.json", to_json(ex.ling_discrete));
  write_json(dir / "source_ling_continuous.json", to_json(ex.ling_continuous));
  write_json(dir / "prompt_tokens.json", to_json(ex.prompt));
  write_json(dir / "prompt_pitch.json", to_json(ex.prompt_pitch));
  write_json(dir / "prompt_ling_discrete.json", to_json(ex.prompt_ling_discrete));
  write_json(dir / "prompt_ling_continuous.json", to_json(ex.prompt_ling_continuous));
}

TrainingExample read_example(const fs::path& dir) {
  TrainingExample ex;
  ex.target = token_grid_from_json(read_json(dir / "source_tokens.json"));
  ex.pitch = pitch_from_json(read_json(dir / "source_pitch.json"));
  ex.ling_discrete = linguistic_from_json(read_json(dir / "source_ling_discrete.json"));
  ex.ling_continuous = linguistic_from_json(read_json(dir / "source_ling_continuous.json"));
  ex.prompt = token_grid_from_json(read_json(dir / "prompt_tokens.json"));
  ex.prompt_pitch = pitch_from_json(read_json(dir / "prompt_pitch.json"));
  ex.prompt_ling_discrete = linguistic_from_json(read_json(dir / "prompt_ling_discrete.json"));
  ex.prompt_ling_continuous = linguistic_from_json(read_json(dir / "prompt_ling_continuous.json"));
  if (ex.pitch.frames() != ex.target.frames() || ex.prompt_pitch.frames() != ex.prompt.frames())
    throw FormatError(dir.string() + ": pitch length differs from token frames");
  return ex;
}

void write_dataset(const fs::path& dir, const SynthWorld& world, int count, std::uint64_t first_index) {
  fs::create_directories(dir);
  json samples = json::array();
  for (int i = 0; i < count; ++i) {
    const SynthSample s = world.sample(first_index + static_cast<std::uint64_t>(i));
    std::ostringstream name;
    name << "sample_" << std::setw(6) << std::setfill('0') << i;
    write_example(dir / name.str(), s.example);
    samples.push_back({{"dir", name.str()}, {"speaker", s.speaker}});
  }
  write_json(dir / "manifest.json",
             {{"world", to_json(world.spec())}, {"count", count}, {"samples", std::move(samples)}});
}

Dataset read_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  return guarded("dataset manifest", [&] {
    require_known_keys(manifest, {"world", "count", "samples"}, "dataset manifest");
    Dataset d;
    d.world = world_spec_from_json(manifest.at("world"));
    for (const auto& s : manifest.at("samples")) {
      d.examples.push_back(read_example(dir / s.at("dir").get<std::string>()));
      d.speakers.push_back(s.at("speaker").get<int>());
    }
    if (static_cast<int>(d.examples.size()) != manifest.at("count").get<int>())
      throw FormatError("dataset manifest: count does not match samples");
    return d;
  });
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace maskvct::io
