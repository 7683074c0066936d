#pragma once

#include "maskvct/model.hpp"
#include "maskvct/synth_world.hpp"

namespace maskvct::testing {

/// A randomly initialized model and a synthetic world with matching sizes.
struct TinySetup {
  ModelConfig model_cfg;
  WorldSpec world_spec;

  TinySetup(int codebooks, int vocab, int source_frames, int prompt_frames, int d_model = 16,
            int layers = 1) {
    model_cfg.layers = layers;
    model_cfg.heads = 2;
    model_cfg.d_model = d_model;
    model_cfg.d_ffn = 2 * d_model;
    model_cfg.codebooks = codebooks;
    model_cfg.vocab = vocab;
    model_cfg.ling_vocab = 4;
    model_cfg.ling_dim = 4;
    world_spec.vocab = vocab;
    world_spec.codebooks = codebooks;
    world_spec.ling_vocab = 4;
    world_spec.ling_dim = 4;
    world_spec.n_speakers = std::min(4, vocab);
    world_spec.source_frames = source_frames;
    world_spec.prompt_frames = prompt_frames;
  }

  /// Model whose weights are spread wide enough to give peaked logits.
  CodecModel model(std::uint64_t seed, double spread = 0.3) const {
    CodecModel m(model_cfg, seed);
    Rng rng(seed ^ 0x5eed);
    for (auto& e : m.params().entries())
      for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += spread * rng.normal();
    return m;
  }

  ConditionBundle bundle(std::uint64_t index, bool continuous = false) const {
    const SynthWorld world(world_spec);
    return world.sample(index).example.bundle(continuous);
  }
};

}  // namespace maskvct::testing
