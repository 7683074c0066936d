#include "maskvct/model.hpp"

namespace maskvct {

CodecModel::CodecModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  add_embedding_params(params_, cfg_.embedding_shape());
  add_encoder_params(params_, cfg_);
  init_params(params_, init_seed);
}

LogitTensor CodecModel::predict(const ConditionBundle& bundle, const MaskedGrid& state,
                                const DropFlags& drop) const {
  ConditionBundle b = bundle;
  b.drop = drop;
  const Mat x = assemble_input(b, state, params_, cfg_.embedding_shape());
  return forward(params_, cfg_, x, b.prompt.frames(), false, nullptr);
}

}  // namespace maskvct
