#pragma once

#include "maskvct/conditioning.hpp"
#include "maskvct/model.hpp"
#include "maskvct/net.hpp"
#include "maskvct/sampler.hpp"
#include "maskvct/synth_world.hpp"
#include "maskvct/token_grid.hpp"
#include "maskvct/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maskvct::io {

using nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

json read_json(const std::filesystem::path& path);
/// Writes with a trailing newline; output is byte-stable for equal values.
void write_json(const std::filesystem::path& path, const json& doc);

/// {frame_rate_hz, vocab_size, num_codebooks, tokens: [[...] x T]}
json to_json(const TokenGrid& grid);
TokenGrid token_grid_from_json(const json& doc);

/// {frame_rate_hz, f0_hz}
json to_json(const PitchContour& contour);
PitchContour pitch_from_json(const json& doc);

/// {mode, tokens | vectors, frame_times[, vocab_size]}
json to_json(const LinguisticSequence& seq);
LinguisticSequence linguistic_from_json(const json& doc);

json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& doc);
json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& doc);
json to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const json& doc);

void save_checkpoint(const std::filesystem::path& path, const CodecModel& model, long step);
struct LoadedCheckpoint {
  CodecModel model;
  long step = 0;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// One synthetic utterance on disk: DIR/{source,prompt}_{tokens,pitch,
/// ling_discrete,ling_continuous}.json
void write_example(const std::filesystem::path& dir, const TrainingExample& ex);
TrainingExample read_example(const std::filesystem::path& dir);

/// Data directory: manifest.json {world, count, samples: [{dir, speaker}]}
/// plus one example directory per sample.
void write_dataset(const std::filesystem::path& dir, const SynthWorld& world, int count,
                   std::uint64_t first_index = 0);
struct Dataset {
  WorldSpec world;
  std::vector<TrainingExample> examples;
  std::vector<int> speakers;
};
Dataset read_dataset(const std::filesystem::path& dir);

/// Throws FormatError naming the first key of `doc` not in `allowed`.
void require_known_keys(const json& doc, std::initializer_list<const char*> allowed,
                        const std::string& context);

/// Stable hex digest (FNV-1a 64) of a string.
std::string fnv1a_hex(const std::string& text);

}  // namespace maskvct::io
