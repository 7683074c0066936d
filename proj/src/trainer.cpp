#include "maskvct/trainer.hpp"

#include "maskvct/ops.hpp"

#include <cmath>
#include <numeric>
#include <thread>

namespace maskvct {

ConditionBundle TrainingExample::bundle(bool continuous, DropFlags drop) const {
  ConditionBundle b;
  b.prompt = prompt;
  b.prompt_ling = continuous ? prompt_ling_continuous : prompt_ling_discrete;
  b.prompt_pitch = prompt_pitch;
  b.ling = continuous ? ling_continuous : ling_discrete;
  b.pitch = pitch;
  b.drop = drop;
  return b;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (steps < 0) throw ConfigError("TrainConfig: steps must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be positive");
  double sum = 0.0;
  for (double r : drop_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("TrainConfig: drop ratios must lie in [0, 1]");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("TrainConfig: drop ratios must sum to 1");
  for (double p : {continuous_ling_prob, spec_augment_fraction, beta1, beta2})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("TrainConfig: probabilities must lie in [0, 1]");
  if (weight_decay < 0.0 || !(epsilon > 0.0)) throw ConfigError("TrainConfig: bad optimizer constants");
  if (threads < 1) throw ConfigError("TrainConfig: threads must be >= 1");
}

MaskedLoss masked_loss(const LogitTensor& logits, const TokenGrid& targets,
                       const LayeredMask& mask) {
  if (logits.frames() != targets.frames() || logits.codebooks() != targets.codebooks() ||
      logits.vocab() != targets.vocab_size() || mask.frames() != targets.frames() ||
      mask.codebooks() != targets.codebooks())
    throw DimensionError("masked_loss: shapes disagree");
  MaskedLoss out;
  for (auto [t, c] : masked_positions(mask)) {
    const Vec z = logits.layer(c).row(t).transpose();
    out.loss -= ops::log_softmax(z)(targets.at(t, c));
    ++out.count;
  }
  if (out.count > 0) out.loss /= out.count;
  return out;
}

LogitTensor masked_loss_gradient(const LogitTensor& logits, const TokenGrid& targets,
                                 const LayeredMask& mask) {
  const auto positions = masked_positions(mask);
  LogitTensor grad(logits.frames(), logits.codebooks(), logits.vocab());
  if (positions.empty()) return grad;
  const double inv = 1.0 / static_cast<double>(positions.size());
  for (auto [t, c] : positions) {
    const Vec z = logits.layer(c).row(t).transpose();
    Vec p = ops::log_softmax(z).array().exp().matrix();
    p(targets.at(t, c)) -= 1.0;
    grad.layer(c).row(t) = (p * inv).transpose();
  }
  return grad;
}

AdamW::AdamW(const ParamStore& like, const TrainConfig& cfg)
    : m_(like.zeros_like()),
      v_(like.zeros_like()),
      lr_(cfg.learning_rate),
      wd_(cfg.weight_decay),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.epsilon) {}

void AdamW::step(ParamStore& params, const ParamStore& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& pe = params.entries();
  const auto& ge = grads.entries();
  for (std::size_t i = 0; i < pe.size(); ++i) {
    auto& p = pe[i].value;
    const auto& g = ge[i].value;
    auto& m = m_.entries()[i].value;
    auto& v = v_.entries()[i].value;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    if (p.rows() > 1) p *= 1.0 - lr_ * wd_;
    p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

namespace {

double sample_gradient(const CodecModel& model, const TrainingExample& ex, const TrainConfig& cfg,
                       std::uint64_t step, std::uint64_t index, ParamStore& grads,
                       SampleDraw& draw) {
  const ModelConfig& mc = model.config();
  Rng rng = Rng::keyed(cfg.seed, {step, index});
  const int frames = ex.target.frames();
  draw.mask = draw_training_mask(frames, mc.codebooks, rng);
  draw.drop = sample_drop_mode(rng, cfg.drop_ratios);
  draw.continuous = rng.bernoulli(cfg.continuous_ling_prob);

  const ConditionBundle bundle = ex.bundle(draw.continuous, drop_flags_for(draw.drop));
  const LayeredMask mask(frames, mc.codebooks, draw.mask.target_layer, draw.mask.keep_row);
  const MaskedGrid masked = apply_mask(ex.target, mask);
  Mat x = assemble_input(bundle, masked, model.params(), mc.embedding_shape());
  draw.augmented_channels = spec_augment_channels(x, cfg.spec_augment_fraction, rng);

  ForwardCache cache;
  const LogitTensor logits = forward(model.params(), mc, x, bundle.prompt.frames(), true, &rng, &cache);
  const MaskedLoss loss = masked_loss(logits, ex.target, mask);
  if (loss.count == 0) return 0.0;
  const LogitTensor d_logits = masked_loss_gradient(logits, ex.target, mask);
  Mat dx = backward(model.params(), mc, cache, d_logits, grads);
  for (int ch : draw.augmented_channels) dx.col(ch).setZero();
  assemble_input_backward(bundle, masked, model.params(), mc.embedding_shape(), dx, grads);
  return loss.loss;
}

}  // namespace

StepResult batch_gradient(const CodecModel& model, std::span<const TrainingExample> batch,
                          const TrainConfig& cfg, std::uint64_t step, ParamStore& grads) {
  const std::size_t n = batch.size();
  if (n == 0) throw ConfigError("batch_gradient: empty batch");
  StepResult result;
  result.draws.resize(n);
  std::vector<double> losses(n, 0.0);
  grads.set_zero();

  if (cfg.threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      ParamStore g = grads.zeros_like();
      losses[i] = sample_gradient(model, batch[i], cfg, step, i, g, result.draws[i]);
      grads.add_scaled(g, 1.0);
    }
  } else {
    std::vector<ParamStore> per_sample(n);
    std::vector<std::thread> workers;
    const int w = std::min<int>(cfg.threads, static_cast<int>(n));
    for (int k = 0; k < w; ++k) {
      workers.emplace_back([&, k] {
        for (std::size_t i = k; i < n; i += w) {
          per_sample[i] = grads.zeros_like();
          losses[i] = sample_gradient(model, batch[i], cfg, step, i, per_sample[i], result.draws[i]);
        }
      });
    }
    for (auto& t : workers) t.join();
    for (std::size_t i = 0; i < n; ++i) grads.add_scaled(per_sample[i], 1.0);
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& e : grads.entries()) e.value *= inv;
  result.loss = std::accumulate(losses.begin(), losses.end(), 0.0) * inv;
  return result;
}

StepResult train_step(CodecModel& model, AdamW& optimizer, std::span<const TrainingExample> batch,
                      const TrainConfig& cfg, std::uint64_t step) {
  ParamStore grads = model.params().zeros_like();
  StepResult result = batch_gradient(model, batch, cfg, step, grads);
  if (!std::isfinite(result.loss)) throw NumericError("train_step: non-finite loss");
  optimizer.step(model.params(), grads);
  return result;
}

}  // namespace maskvct
