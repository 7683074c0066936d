#pragma once

#include "maskvct/conditioning.hpp"
#include "maskvct/net.hpp"
#include "maskvct/params.hpp"
#include "maskvct/token_grid.hpp"

#include <cstdint>

namespace maskvct {

/// Anything that scores the source frames of a partially masked grid under a
/// conditioning configuration. The sampler and its oracle only see this.
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;
  virtual int codebooks() const = 0;
  virtual int vocab() const = 0;
  virtual LogitTensor predict(const ConditionBundle& bundle, const MaskedGrid& state,
                              const DropFlags& drop) const = 0;
};

/// Embedding tables + encoder + heads behind one parameter store.
class CodecModel : public ConditionalModel {
 public:
  explicit CodecModel(ModelConfig cfg, std::uint64_t init_seed = 0);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  int codebooks() const override { return cfg_.codebooks; }
  int vocab() const override { return cfg_.vocab; }

  /// Deterministic (eval mode) logits; `bundle.drop` is replaced by `drop`.
  LogitTensor predict(const ConditionBundle& bundle, const MaskedGrid& state,
                      const DropFlags& drop) const override;

 private:
  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace maskvct
