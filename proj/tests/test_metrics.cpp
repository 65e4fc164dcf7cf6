#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "emoseq/error.hpp"
#include "emoseq/metrics.hpp"

using namespace emoseq;
using namespace emoseq::metrics;

namespace {

ConfusionMatrix permuted(const ConfusionMatrix& cm, const std::vector<std::size_t>& perm) {
  ConfusionMatrix out(cm.classes());
  for (std::size_t t = 0; t < cm.classes(); ++t)
    for (std::size_t p = 0; p < cm.classes(); ++p) out.add(perm[t], perm[p], cm.at(t, p));
  return out;
}

ConfusionMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
  ConfusionMatrix cm(n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t p = 0; p < n; ++p) cm.add(t, p, rng() % 6);
  cm.add(0, 0);
  return cm;
}

}  // namespace

TEST_CASE("unweighted accuracy and macro F1 fixtures") {
  const ConfusionMatrix cm(2, {2, 0, 1, 1});
  CHECK(std::abs(unweighted_accuracy(cm) - 0.75) <= 1e-12);
  CHECK(std::abs(macro_f1(cm) - (0.8 + 2.0 / 3.0) / 2.0) <= 1e-12);
  CHECK(macro_f1(cm) == doctest::Approx(0.7333333333));

  const ConfusionMatrix one_sided(2, {5, 0, 5, 0});
  CHECK(std::abs(macro_f1(one_sided) - 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(unweighted_accuracy(one_sided) - 0.5) <= 1e-12);

  ConfusionMatrix diag(7);
  for (std::size_t k = 0; k < 7; ++k) diag.add(k, k, k + 1);
  CHECK(unweighted_accuracy(diag) == 1.0);
  CHECK(macro_f1(diag) == 1.0);

  // Classes without true examples leave the recall mean.
  const ConfusionMatrix absent(3, {4, 0, 0, 0, 0, 0, 1, 0, 1});
  CHECK(std::abs(unweighted_accuracy(absent) - 0.75) <= 1e-12);

  CHECK_THROWS_AS(unweighted_accuracy(ConfusionMatrix(3)), Error);
  CHECK_THROWS_AS(macro_f1(ConfusionMatrix(3)), Error);
  CHECK_THROWS_AS(ConfusionMatrix(2, {1, 2, 3}), Error);
  CHECK_THROWS_AS(confusion({0, 1}, {0}, 2), Error);
  CHECK_THROWS_AS(confusion({0, 2}, {0, 0}, 2), Error);
}

TEST_CASE("mse fixtures") {
  CHECK(mse({0.3, -0.1}, {0.3, -0.1}) == 0.0);
  CHECK(mse({0.0, 1.0}, {1.0, 0.0}) == 1.0);
  CHECK(std::abs(mse({0.2, 0.4, 0.9}, {0.0, 0.5, 1.0}) - 0.02) <= 1e-12);
  try {
    mse({1.0}, {1.0, 2.0});
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
  CHECK_THROWS_AS(mse({}, {}), Error);
}

TEST_CASE("uniform-random predictions score about 1/N") {
  std::mt19937_64 rng(99);
  for (std::size_t n : {2u, 4u, 7u}) {
    std::vector<std::size_t> truth(10000), pred(10000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth[i] = rng() % n;
      pred[i] = rng() % n;
    }
    CHECK(std::abs(unweighted_accuracy(confusion(truth, pred, n)) - 1.0 / static_cast<double>(n)) <= 0.02);
  }
}

TEST_CASE("metric properties") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 6;
    const ConfusionMatrix cm = random_matrix(rng, n);
    const double ua = unweighted_accuracy(cm), f1 = macro_f1(cm);
    CHECK(ua >= 0.0);
    CHECK(ua <= 1.0);
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const ConfusionMatrix pm = permuted(cm, perm);
    CHECK(unweighted_accuracy(pm) == doctest::Approx(ua).epsilon(1e-12));
    CHECK(macro_f1(pm) == doctest::Approx(f1).epsilon(1e-12));

    // Duplicating one class's examples leaves the recall mean unchanged.
    const std::size_t k = rng() % n;
    ConfusionMatrix dup = cm;
    for (std::size_t p = 0; p < n; ++p) dup.add(k, p, cm.at(k, p));
    CHECK(unweighted_accuracy(dup) == doctest::Approx(ua).epsilon(1e-12));

    std::vector<double> a(5), b(5);
    for (std::size_t i = 0; i < 5; ++i) {
      a[i] = std::normal_distribution<double>()(rng);
      b[i] = std::normal_distribution<double>()(rng);
    }
    CHECK(mse(a, b) >= 0.0);
  }
}

TEST_CASE("report json") {
  Report r;
  r.unweighted_accuracy = 0.75;
  r.macro_f1 = 0.5;
  r.mse_arousal = 0.04;
  r.mse_valence = 0.09;
  r.confusion = ConfusionMatrix(2, {2, 0, 1, 1});
  const std::string text = to_json(r);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["unweighted_accuracy"] == 0.75);
  CHECK(j["mse_valence"] == 0.09);
  CHECK(j["confusion"] == nlohmann::json::parse("[[2,0],[1,1]]"));
  CHECK(text.find("unweighted_accuracy") < text.find("macro_f1"));
  CHECK(text.find("mse_valence") < text.find("confusion"));
}
