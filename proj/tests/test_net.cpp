#include "maskvct/net.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <limits>

using namespace maskvct;
using maskvct::testing::central_difference;
using maskvct::testing::relative_error;

namespace {

ModelConfig tiny_config(double dropout = 0.0, double layer_drop = 0.0) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 4;
  c.d_model = 32;
  c.d_ffn = 64;
  c.codebooks = 2;
  c.vocab = 8;
  c.dropout = dropout;
  c.layer_drop = layer_drop;
  return c;
}

ParamStore make_params(const ModelConfig& cfg, std::uint64_t seed, double spread) {
  ParamStore p;
  add_encoder_params(p, cfg);
  init_params(p, seed);
  // Spread weights beyond the init scale so every path carries gradient.
  Rng rng(seed + 1);
  for (auto& e : p.entries())
    for (Eigen::Index i = 0; i < e.value.size(); ++i) e.value.data()[i] += spread * rng.normal();
  return p;
}

Mat random_input(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Mat x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

double projection(const LogitTensor& logits, const std::vector<Mat>& weights) {
  double s = 0.0;
  for (int c = 0; c < logits.codebooks(); ++c) s += (logits.layer(c).array() * weights[c].array()).sum();
  return s;
}

void check_gradients(const ModelConfig& cfg, bool train) {
  ParamStore params = make_params(cfg, 21, 0.2);
  const int prompt = 3, total = 9;
  const Mat x = random_input(total, cfg.d_model, 5);
  std::vector<Mat> proj;
  for (int c = 0; c < cfg.codebooks; ++c) proj.push_back(random_input(total - prompt, cfg.vocab, 30 + c));

  auto run = [&](ForwardCache* cache) {
    Rng rng(1234);
    return forward(params, cfg, x, prompt, train, &rng, cache);
  };
  ForwardCache cache;
  const LogitTensor logits = run(&cache);
  LogitTensor d_logits(logits.frames(), logits.codebooks(), logits.vocab());
  for (int c = 0; c < cfg.codebooks; ++c) d_logits.layer(c) = proj[c];
  ParamStore grads = params.zeros_like();
  backward(params, cfg, cache, d_logits, grads);

  Rng pick(77);
  double worst = 0.0;
  for (int n = 0; n < 60; ++n) {
    const std::size_t i = static_cast<std::size_t>(pick.uniform_int(static_cast<int>(params.total_size())));
    const double fd = central_difference(params, i, [&] { return projection(run(nullptr), proj); });
    const double err = relative_error(grads.flat(i), fd);
    worst = std::max(worst, err);
    CHECK_MESSAGE(err < 1e-4, params.flat_name(i) << " analytic " << grads.flat(i) << " fd " << fd);
  }
  MESSAGE("worst relative error " << worst);
}

}  // namespace

TEST_CASE("ModelConfig validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.d_model = 30;
  c.heads = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward is deterministic in eval mode and drops prompt frames") {
  const ModelConfig cfg = tiny_config(0.05, 0.05);
  const ParamStore p = make_params(cfg, 1, 0.0);
  const Mat x = random_input(160, cfg.d_model, 2);
  const LogitTensor a = forward(p, cfg, x, 150, false, nullptr);
  const LogitTensor b = forward(p, cfg, x, 150, false, nullptr);
  CHECK(a == b);
  CHECK(a.frames() == 10);
  CHECK(a.codebooks() == cfg.codebooks);
  CHECK(a.all_finite());
}

TEST_CASE("forward rejects non-finite input and missing rng in train mode") {
  const ModelConfig cfg = tiny_config();
  const ParamStore p = make_params(cfg, 1, 0.0);
  Mat x = random_input(4, cfg.d_model, 2);
  CHECK_THROWS_AS(forward(p, cfg, x, 0, true, nullptr), ConfigError);
  x(1, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forward(p, cfg, x, 0, false, nullptr), NumericError);
}

TEST_CASE("backward matches central differences (eval mode)") { check_gradients(tiny_config(), false); }

TEST_CASE("backward matches central differences with dropout and layer drop active") {
  check_gradients(tiny_config(0.3, 0.3), true);
}

TEST_CASE("samples in a batch do not interact") {
  const ModelConfig cfg = tiny_config();
  const ParamStore p = make_params(cfg, 4, 0.1);
  std::vector<Mat> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_input(6 + i, cfg.d_model, 100 + i));
  std::vector<LogitTensor> out;
  for (const auto& x : batch) out.push_back(forward(p, cfg, x, 2, false, nullptr));
  const int perm[] = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) CHECK(forward(p, cfg, batch[perm[i]], 2, false, nullptr) == out[perm[i]]);
}

TEST_CASE("rotary encoding makes outputs position dependent") {
  const ModelConfig cfg = tiny_config();
  const ParamStore p = make_params(cfg, 6, 0.2);
  const Mat x = random_input(6, cfg.d_model, 9);
  Mat shifted(7, cfg.d_model);
  shifted.row(0) = random_input(1, cfg.d_model, 10);
  shifted.bottomRows(6) = x;
  const LogitTensor a = forward(p, cfg, x, 0, false, nullptr);
  const LogitTensor b = forward(p, cfg, shifted, 1, false, nullptr);
  CHECK_FALSE(a == b);
}

TEST_CASE("a single frame at offset 0 ignores the query/key projections") {
  const ModelConfig cfg = tiny_config();
  ParamStore p = make_params(cfg, 6, 0.2);
  const Mat x = random_input(1, cfg.d_model, 12);
  const LogitTensor a = forward(p, cfg, x, 0, false, nullptr);
  p.get("layer.0.attn.wq") *= 3.0;
  p.get("layer.1.attn.wk").setRandom();
  const LogitTensor b = forward(p, cfg, x, 0, false, nullptr);
  for (int c = 0; c < cfg.codebooks; ++c) CHECK((a.layer(c) - b.layer(c)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotary tables start at the identity") {
  Mat c, s;
  rotary_tables(3, 8, c, s);
  CHECK(c.row(0).isOnes());
  CHECK(s.row(0).isZero());
  CHECK(c(2, 0) == doctest::Approx(std::cos(2.0)));
}
