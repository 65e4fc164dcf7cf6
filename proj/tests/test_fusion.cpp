#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "emoseq/error.hpp"
#include "emoseq/fusion.hpp"
#include "emoseq/metrics.hpp"
#include "emoseq/pipeline.hpp"
#include "emoseq/synth.hpp"
#include "oracles.hpp"

using namespace emoseq;
using namespace emoseq::fusion;

namespace {

model::HeadParams zero_head(std::size_t classes, std::size_t dim) {
  return {std::vector<double>(classes * dim, 0.0), std::vector<double>(classes, 0.0),
          std::vector<double>(2 * dim, 0.0), std::vector<double>(2, 0.0)};
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

model::ModelShape branch_shape(std::size_t d, std::size_t h) {
  model::ModelShape s;
  s.use_encoder = false;
  s.embed_dim = d;
  s.hidden = h;
  s.num_classes = 4;
  return s;
}

std::vector<std::span<double>> all_values(FusionModel& m) {
  std::vector<std::span<double>> out;
  for (auto& b : m.branches)
    for (auto& t : model::tensors(b)) out.push_back(t.values);
  out.emplace_back(m.head.class_w);
  out.emplace_back(m.head.class_b);
  out.emplace_back(m.head.reg_w);
  out.emplace_back(m.head.reg_b);
  return out;
}

}  // namespace

TEST_CASE("fuse: zero head and simplex") {
  std::mt19937_64 rng(1);
  const std::vector<ModalityEmbedding> e{{"a", gaussian(rng, 3)}, {"b", gaussian(rng, 4)}};
  const IntervalOutput out = fuse(e, zero_head(7, 7), 7);
  for (double p : out.class_probs) CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(out.arousal == 0.0);
  CHECK(out.valence == 0.0);

  for (int trial = 0; trial < 100; ++trial) {
    model::HeadParams h = zero_head(7, 7);
    h.class_w = gaussian(rng, 49, 4.0);
    h.reg_w = gaussian(rng, 14, 3.0);
    h.reg_b = gaussian(rng, 2, 3.0);
    const auto r = fuse(e, h, 7);
    double sum = 0.0;
    for (double p : r.class_probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(r.arousal >= 0.0);
    CHECK(r.arousal <= 1.0);
    CHECK(r.valence >= -1.0);
    CHECK(r.valence <= 1.0);
  }
  CHECK_THROWS_AS(fuse(e, zero_head(7, 6), 7), Error);
}

TEST_CASE("fuse: single-modality reduction") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = gaussian(rng, 3);
    model::HeadParams full = zero_head(4, 6);
    full.class_w = gaussian(rng, 24);
    full.class_b = gaussian(rng, 4);
    model::HeadParams alone = zero_head(4, 3);
    alone.class_b = full.class_b;
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t j = 0; j < 3; ++j) alone.class_w[k * 3 + j] = full.class_w[k * 6 + j];
    const auto a = fuse({{"a", x}, ModalityEmbedding::absent("b", 3)}, full, 4);
    const auto b = fuse({{"a", x}}, alone, 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.class_probs[k] == doctest::Approx(b.class_probs[k]).epsilon(1e-14));
  }
}

TEST_CASE("fuse: hand-computed fixture") {
  // Two classes, modalities of width 3: x = (1, 0, -1 | 0.5, 2, 0).
  model::HeadParams h = zero_head(2, 6);
  h.class_w = {1, 0, 0, 0, 0.5, 0,  //
               0, 0, 1, 1, 0, 0};
  h.class_b = {0.1, -0.1};
  h.reg_w = {0.2, 0, 0, 0, 0, 0,  //
             0, 0, 0, 0, -0.25, 0};
  h.reg_b = {0.3, 0.0};
  const auto out = fuse({{"a", {1, 0, -1}}, {"b", {0.5, 2, 0}}}, h, 2);
  // logits: 1 + 1 + 0.1 = 2.1 and -1 + 0.5 - 0.1 = -0.6
  const double p0 = 1.0 / (1.0 + std::exp(-0.6 - 2.1));
  CHECK(std::abs(out.class_probs[0] - p0) <= 1e-9);
  CHECK(std::abs(out.class_probs[1] - (1.0 - p0)) <= 1e-9);
  CHECK(std::abs(out.arousal - 0.5) <= 1e-12);
  CHECK(std::abs(out.valence - -0.5) <= 1e-12);
}

TEST_CASE("aggregate_utterance") {
  const IntervalOutput a{{0.6, 0.4}, 0.2, -0.4}, b{{0.45, 0.55}, 0.6, 0.0};
  const auto one = aggregate_utterance({a});
  CHECK(one.class_probs == a.class_probs);
  CHECK(one.arousal == a.arousal);
  CHECK(one.predicted_class == 0);

  const auto ab = aggregate_utterance({a, b});
  CHECK(ab.predicted_class == 0);
  CHECK(ab.class_probs[0] == doctest::Approx(0.525));
  CHECK(ab.arousal == doctest::Approx(0.4));
  CHECK(ab.valence == doctest::Approx(-0.2));
  const auto ba = aggregate_utterance({b, a});
  CHECK(ba.predicted_class == ab.predicted_class);
  CHECK(ba.class_probs == ab.class_probs);

  CHECK(aggregate_utterance({{{0.5, 0.5}, 0, 0}}).predicted_class == 0);
  CHECK_THROWS_AS(aggregate_utterance({}), Error);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<IntervalOutput> xs(1 + rng() % 5);
    for (auto& x : xs) {
      x.class_probs.resize(7);
      for (double& p : x.class_probs) p = u(rng);
    }
    const std::size_t base = aggregate_utterance(xs).predicted_class;
    const double c = 0.1 + 5.0 * u(rng);
    auto scaled = xs;
    for (auto& x : scaled)
      for (double& p : x.class_probs) p *= c;
    CHECK(aggregate_utterance(scaled).predicted_class == base);
    std::shuffle(xs.begin(), xs.end(), rng);
    CHECK(aggregate_utterance(xs).predicted_class == base);
  }
}

TEST_CASE("fusion gradients") {
  std::mt19937_64 rng(4);
  FusionModel m = init_fusion({"a", "b"}, {branch_shape(3, 3), branch_shape(2, 4)}, 4, 7);
  for (auto v : all_values(m))
    for (double& x : v) x = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);

  auto seq = [&](std::size_t steps, std::size_t d) {
    model::Sequence s(steps);
    for (auto& x : s) x = gaussian(rng, d);
    return s;
  };
  const std::vector<FusionExample> cases{{{seq(4, 3), seq(4, 2)}, 2, 0.7, -0.3},
                                         {{seq(3, 3), std::nullopt}, 1, 0.1, 0.5}};
  for (const auto& ex : cases) {
    for (const bool joint : {true, false}) {
      const auto lg = fusion_backward(m, ex, 0.8, joint);
      CHECK(lg.loss == doctest::Approx(fusion_loss(m, ex, 0.8)));
      FusionModel g = lg.grads;
      auto params = all_values(m);
      const auto grads = all_values(g);
      const std::size_t branch_tensors = params.size() - 4;
      for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t k = 0; k < params[i].size(); ++k) {
          const double fd = oracle::central_difference([&] { return fusion_loss(m, ex, 0.8); }, params[i][k]);
          if (!joint && i < branch_tensors) {
            CHECK(grads[i][k] == 0.0);
          } else {
            CHECK(oracle::relative_error(fd, grads[i][k]) <= 1e-4);
          }
        }
      }
    }
  }

  // lambda = 0 leaves the regression head without gradient.
  const auto lg0 = fusion_backward(m, cases[0], 0.0, true);
  for (double v : lg0.grads.head.reg_w) CHECK(v == 0.0);
  for (double v : lg0.grads.head.reg_b) CHECK(v == 0.0);

  FusionExample bad = cases[0];
  bad.label = 4;
  try {
    fusion_backward(m, bad, 1.0, true);
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
  FusionConfig cfg;
  CHECK_THROWS_AS(train_fusion(cfg, m, {bad}), Error);
  CHECK_THROWS_AS(train_fusion(cfg, m, {}), Error);
}

TEST_CASE("complementary modalities: fusion beats either branch") {
  const auto dir = std::filesystem::path(EMOSEQ_TEST_TMP) / "complementary";
  SynthOptions opt;
  opt.kind = SynthKind::ComplementaryModalities;
  opt.count = 80;
  opt.seed = 5;
  const Manifest manifest = generate_synthetic(opt, dir);
  const auto data = pipeline::load_data(manifest, {"m1", "m2"}, std::nullopt);
  REQUIRE(data.utterances.size() == 80);

  std::vector<FusionExample> fused;
  std::vector<Example> single[2];
  for (const auto& u : data.utterances) {
    fused.push_back({u.inputs, u.label, u.arousal, u.valence});
    for (int b = 0; b < 2; ++b) single[b].push_back({*u.inputs[b], u.label, u.arousal, u.valence});
  }

  FusionConfig fcfg;
  fcfg.learning_rate = 0.1;
  fcfg.epochs = 40;
  const auto shape = branch_shape(opt.embed_dim, 8);
  const auto trained = train_fusion(fcfg, init_fusion({"m1", "m2"}, {shape, shape}, 4, 1), fused);
  std::vector<std::size_t> truth, pred;
  for (const auto& ex : fused) {
    truth.push_back(ex.label);
    pred.push_back(aggregate_utterance({predict_fused(trained.model, ex.inputs)}).predicted_class);
  }
  const double fused_ua = metrics::unweighted_accuracy(metrics::confusion(truth, pred, 4));

  TrainConfig scfg;
  scfg.learning_rate = 0.1;
  scfg.epochs = 40;
  for (int b = 0; b < 2; ++b) {
    const auto r = train(scfg, shape, single[b]);
    std::vector<std::size_t> p;
    for (const auto& ex : single[b]) p.push_back(argmax(predict_interval(r.params, ex.input).class_probs));
    const double ua = metrics::unweighted_accuracy(metrics::confusion(truth, p, 4));
    INFO("branch " << b << " ua " << ua << " fused " << fused_ua);
    CHECK(ua <= 0.6);
    CHECK(fused_ua >= ua);
  }
  CHECK(fused_ua >= 0.9);
}
