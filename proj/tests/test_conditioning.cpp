#include "maskvct/conditioning.hpp"
#include "maskvct/net.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace maskvct;
using maskvct::testing::direct_pitch_entry;

namespace {

LinguisticSequence discrete_seq(std::vector<int> tokens, std::vector<double> times, int vocab) {
  LinguisticSequence s;
  s.mode = LinguisticMode::discrete;
  s.tokens = std::move(tokens);
  s.frame_times = std::move(times);
  s.vocab_size = vocab;
  return s;
}

struct Fixture {
  ModelConfig cfg;
  ParamStore params;
  Fixture() {
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.codebooks = 2;
    cfg.vocab = 4;
    cfg.ling_vocab = 3;
    cfg.ling_dim = 5;
    add_embedding_params(params, cfg.embedding_shape());
    init_params(params, 5);
  }
  ConditionBundle bundle(int prompt_frames, int source_frames) const {
    ConditionBundle b;
    b.prompt = TokenGrid(prompt_frames, cfg.codebooks, cfg.vocab);
    for (int t = 0; t < prompt_frames; ++t) b.prompt.set(t, 1, (t + 1) % cfg.vocab);
    b.prompt_ling = discrete_seq({1}, {0.0}, cfg.ling_vocab);
    b.prompt_pitch = PitchContour{std::vector<double>(prompt_frames, 120.0)};
    b.ling = discrete_seq({0, 2}, {0.0, 0.04}, cfg.ling_vocab);
    std::vector<double> f0(source_frames);
    for (int t = 0; t < source_frames; ++t) f0[t] = 100.0 + 20.0 * t;
    b.pitch = PitchContour{f0};
    return b;
  }
};

}  // namespace

TEST_CASE("pitch_embedding tabulated values") {
  CHECK(pitch_embedding(0.0, 4) == Vec((Vec(4) << 0, 0, 1, 1).finished()));
  const double f = std::numbers::e - 1.0;
  const Vec two = pitch_embedding(f, 2);
  CHECK(two(0) == doctest::Approx(0.8414709848).epsilon(1e-9));
  CHECK(two(1) == doctest::Approx(0.5403023059).epsilon(1e-9));
  const Vec four = pitch_embedding(f, 4);
  const double expected[] = {0.8414709848, 0.0099998333, 0.5403023059, 0.9999500004};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(four(i) - expected[i]) < 1e-9);
}

TEST_CASE("pitch_embedding domain errors") {
  CHECK_THROWS_AS(pitch_embedding(-1.0, 4), DomainError);
  CHECK_THROWS_AS(pitch_embedding(100.0, 5), DomainError);
  CHECK_THROWS_AS(pitch_embedding(100.0, 0), DomainError);
}

TEST_CASE("pitch_embedding matches direct evaluation, stays bounded and separates 50-500 Hz") {
  Rng rng(3);
  for (int n = 0; n < 300; ++n) {
    const double f = rng.uniform() * 1000.0;
    const int d = 2 * (1 + rng.uniform_int(64));
    const Vec e = pitch_embedding(f, d);
    for (int i = 0; i < d; ++i) {
      CHECK(std::abs(e(i) - direct_pitch_entry(f, d, i)) < 1e-12);
      CHECK(std::abs(e(i)) <= 1.0);
    }
  }
  for (int d : {8, 16, 64}) {
    std::vector<Vec> grid;
    for (int f = 50; f <= 500; ++f) grid.push_back(pitch_embedding(f, d));
    for (std::size_t i = 1; i < grid.size(); ++i)
      CHECK((grid[i] - grid[i - 1]).cwiseAbs().maxCoeff() > 1e-9);
  }
}

TEST_CASE("embed_pitch_contour is framewise") {
  const Mat z = embed_pitch_contour(PitchContour{{0, 0, 0}}, 4);
  CHECK(z.rows() == 3);
  for (int t = 0; t < 3; ++t) CHECK(z.row(t) == (RowVec(4) << 0, 0, 1, 1).finished());
  const Mat one = embed_pitch_contour(PitchContour{{std::numbers::e - 1.0}}, 2);
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(embed_pitch_contour(PitchContour{{100.0, -2.0}}, 4), DomainError);
}

TEST_CASE("upsample_linguistic hold rule") {
  const auto single = upsample_linguistic(discrete_seq({4}, {0.0}, 8), 5);
  CHECK(single.tokens == std::vector<int>(5, 4));
  const auto two = upsample_linguistic(discrete_seq({3, 7}, {0.0, 0.12}, 8), 12, 50.0);
  CHECK(two.tokens == std::vector<int>{3, 3, 3, 3, 3, 3, 7, 7, 7, 7, 7, 7});
  CHECK_THROWS_AS(upsample_linguistic(discrete_seq({}, {}, 8), 4), DomainError);
}

TEST_CASE("upsample_linguistic never skips a segment that starts inside the window") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int segments = 1 + rng.uniform_int(20);
    std::vector<int> tokens(segments);
    std::vector<double> times(segments);
    double t = 0.0;
    for (int i = 0; i < segments; ++i) {
      tokens[i] = i;
      times[i] = t;
      t += 0.02 * (1 + rng.uniform_int(10));
    }
    const int frames = 1 + rng.uniform_int(120);
    const auto aligned = upsample_linguistic(discrete_seq(tokens, times, segments), frames);
    for (int f = 1; f < frames; ++f) CHECK(aligned.tokens[f] >= aligned.tokens[f - 1]);
    // Segments with distinct 50 Hz frames inside the window all appear.
    for (int i = 0; i < segments; ++i) {
      const bool starts_inside = std::ceil(times[i] * 50 - 1e-9) < frames;
      const bool own_frame = i + 1 == segments || std::ceil(times[i] * 50 - 1e-9) < std::ceil(times[i + 1] * 50 - 1e-9);
      if (starts_inside && own_frame)
        CHECK_MESSAGE(std::find(aligned.tokens.begin(), aligned.tokens.end(), i) != aligned.tokens.end(), "seg " << i << " time " << times[i] << " next " << (i + 1 < segments ? times[i + 1] : -1.0) << " frames " << frames);
    }
  }
}

TEST_CASE("sample_condition_drop frequencies and determinism") {
  Rng rng(77);
  const int n = 110000;
  long all = 0, null = 0;
  for (int i = 0; i < n; ++i) {
    const DropFlags f = sample_condition_drop(rng);
    all += f == DropFlags{false, false, false};
    null += f == DropFlags{true, true, true};
  }
  CHECK(std::abs(static_cast<double>(all) / n - 6.0 / 11) < 0.01);
  CHECK(std::abs(static_cast<double>(null) / n - 1.0 / 11) < 0.006);
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(sample_condition_drop(a) == sample_condition_drop(b));
}

TEST_CASE("drop modes map to the guidance configurations") {
  CHECK(drop_flags_for(DropMode::all) == DropFlags{false, false, false});
  CHECK(drop_flags_for(DropMode::spk) == DropFlags{false, false, true});
  CHECK(drop_flags_for(DropMode::ling) == DropFlags{true, false, true});
  CHECK(drop_flags_for(DropMode::null) == DropFlags{true, true, true});
}

TEST_CASE("spec_augment_channels") {
  Rng rng(1);
  Mat x = Mat::Ones(5, 100);
  const Mat before = x;
  CHECK(spec_augment_channels(x, 0.0, rng).empty());
  CHECK(x == before);
  const auto zeroed = spec_augment_channels(x, 0.1, rng);
  CHECK(zeroed.size() == 10);
  int zero_cols = 0;
  for (int c = 0; c < 100; ++c) zero_cols += x.col(c).isZero();
  CHECK(zero_cols == 10);
  Mat y = Mat::Ones(3, 7);
  spec_augment_channels(y, 1.0, rng);
  CHECK(y.isZero());
  CHECK_THROWS_AS(spec_augment_channels(y, 1.5, rng), DomainError);
}

TEST_CASE("assemble_input frame count: 3 s prompt + 10.24 s source at 50 Hz") {
  Fixture fx;
  auto b = fx.bundle(150, 512);
  const MaskedGrid acoustic = all_masked(512, fx.cfg.codebooks, fx.cfg.vocab);
  const Mat x = assemble_input(b, acoustic, fx.params, fx.cfg.embedding_shape());
  CHECK(x.rows() == 662);
  CHECK(x.cols() == fx.cfg.d_model);
}

TEST_CASE("assemble_input with everything dropped and masked gives identical source rows") {
  Fixture fx;
  auto b = fx.bundle(3, 6);
  b.drop = drop_flags_for(DropMode::null);
  const Mat x = assemble_input(b, all_masked(6, 2, 4), fx.params, fx.cfg.embedding_shape());
  for (int t = 4; t < 9; ++t) CHECK(x.row(t) == x.row(3));
  // A dropped speaker masks the prompt too.
  CHECK(x.row(0) == x.row(3));
}

TEST_CASE("assemble_input is additive in the pitch condition") {
  Fixture fx;
  auto b = fx.bundle(3, 6);
  const MaskedGrid acoustic = all_masked(6, 2, 4);
  const auto shape = fx.cfg.embedding_shape();
  const Mat with = assemble_input(b, acoustic, fx.params, shape);
  b.drop.pitch = true;
  const Mat without = assemble_input(b, acoustic, fx.params, shape);
  const Mat diff = with - without;
  const Mat src_pitch = embed_pitch_contour(*b.pitch, fx.cfg.d_model);
  const Mat prompt_pitch = embed_pitch_contour(*b.prompt_pitch, fx.cfg.d_model);
  const RowVec mask = fx.params.get("embed.pitch_mask").row(0);
  for (int t = 0; t < 3; ++t) CHECK((diff.row(t) - (prompt_pitch.row(t) - mask)).norm() < 1e-12);
  for (int t = 0; t < 6; ++t) CHECK((diff.row(3 + t) - (src_pitch.row(t) - mask)).norm() < 1e-12);
}

TEST_CASE("assemble_input uses the per-layer mask embedding for the sentinel") {
  Fixture fx;
  auto b = fx.bundle(2, 3);
  const auto shape = fx.cfg.embedding_shape();
  const TokenGrid grid({0, 1, 2, 3, 1, 0}, 3, 2, 4);
  const Mat visible = assemble_input(b, apply_mask(grid, LayeredMask(3, 2, 1, {1, 1, 1})), fx.params, shape);
  const Mat hidden = assemble_input(b, apply_mask(grid, LayeredMask(3, 2, 1, {1, 0, 1})), fx.params, shape);
  const Mat& table = fx.params.get("embed.acoustic.1");
  CHECK((hidden.row(3) - visible.row(3) - (table.row(4) - table.row(3))).norm() < 1e-12);
  CHECK(hidden.row(2) == visible.row(2));
}

TEST_CASE("assemble_input rejects misaligned pitch") {
  Fixture fx;
  auto b = fx.bundle(2, 4);
  b.pitch->f0_hz.pop_back();
  CHECK_THROWS_AS(assemble_input(b, all_masked(4, 2, 4), fx.params, fx.cfg.embedding_shape()),
                  DimensionError);
}

TEST_CASE("assemble_input_backward matches finite differences") {
  Fixture fx;
  auto b = fx.bundle(2, 4);
  // Continuous path for the source, discrete for the prompt.
  b.ling.mode = LinguisticMode::continuous;
  b.ling.tokens.clear();
  b.ling.vectors = Mat::Random(2, fx.cfg.ling_dim);
  const auto shape = fx.cfg.embedding_shape();
  const MaskedGrid acoustic = all_masked(4, 2, 4);
  Rng rng(4);
  Mat weight(6, fx.cfg.d_model);
  for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.normal();
  auto loss = [&] { return (assemble_input(b, acoustic, fx.params, shape).array() * weight.array()).sum(); };
  ParamStore grads = fx.params.zeros_like();
  assemble_input_backward(b, acoustic, fx.params, shape, weight, grads);
  for (std::size_t i = 0; i < fx.params.total_size(); ++i) {
    const double fd = maskvct::testing::central_difference(fx.params, i, loss, 1e-5);
    CHECK_MESSAGE(std::abs(fd - grads.flat(i)) < 1e-6 * std::max(1.0, std::abs(fd)), fx.params.flat_name(i));
  }
}
