#include <doctest.h>

#include <cmath>
#include <random>

#include "logsy/objective.hpp"
#include "oracles.hpp"

using namespace logsy;

namespace {

EmbeddingVector with_norm_sq(double norm_sq, std::size_t d = 4) {
  EmbeddingVector z = EmbeddingVector::Zero(static_cast<long>(d));
  z(0) = std::sqrt(norm_sq);
  return z;
}

LossConfig unit_weights() {
  LossConfig c;
  c.weight_normal = 1.0;
  c.weight_anomaly = 1.0;
  return c;
}

}  // namespace

TEST_CASE("radial score") {
  CHECK(radial_score(EmbeddingVector::Zero(4)) == 1.0);
  CHECK(radial_score(with_norm_sq(std::log(2.0))) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(radial_score(with_norm_sq(1e4)) >= 0.0);
  CHECK(radial_score(with_norm_sq(1e4)) < 1e-300);
}

TEST_CASE("anomaly score") {
  CHECK(anomaly_score(EmbeddingVector::Zero(16)) == 0.0);
  EmbeddingVector z = EmbeddingVector::Zero(16);
  z(0) = 3.0;
  z(1) = 4.0;
  CHECK(anomaly_score(z) == 25.0);
  CHECK(anomaly_score(-z) == 25.0);
}

TEST_CASE("hypersphere loss examples") {
  const LossConfig unit = unit_weights();
  const std::vector<LabeledEmbedding> center{{EmbeddingVector::Zero(4), 0}};
  CHECK(hypersphere_loss(center, LossConfig{}) == 0.0);

  const std::vector<LabeledEmbedding> half{{with_norm_sq(std::log(2.0)), 1}};
  CHECK(std::abs(hypersphere_loss(half, unit) - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(hypersphere_loss(half, unit) - 0.6931) < 1e-4);

  const std::vector<LabeledEmbedding> singular{{EmbeddingVector::Zero(4), 1}};
  CHECK(hypersphere_loss(singular, unit) == doctest::Approx(-std::log(1e-12)).epsilon(1e-15));
  CHECK(std::isfinite(hypersphere_loss(singular, unit)));

  CHECK_THROWS_AS(hypersphere_loss({}, unit), std::invalid_argument);
  const std::vector<LabeledEmbedding> bad{{EmbeddingVector::Zero(4), 2}};
  CHECK_THROWS_AS(hypersphere_loss(bad, unit), std::invalid_argument);
}

TEST_CASE("class weights and batch mean") {
  const LossConfig cfg;  // 0.5 / 1.0
  const EmbeddingVector a = with_norm_sq(2.0), b = with_norm_sq(1.0);
  const std::vector<LabeledEmbedding> batch{{a, 0}, {b, 1}};
  const double expected = (0.5 * 2.0 + 1.0 * -std::log(1.0 - std::exp(-1.0))) / 2.0;
  CHECK(hypersphere_loss(batch, cfg) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("loss config validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.weight_normal = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = LossConfig{};
  c.clamp_eps = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("loss is non-negative and zero only at the centre without anomalies") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.5);
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 500; ++t) {
    std::vector<LabeledEmbedding> batch;
    for (int i = 0; i < 5; ++i) {
      EmbeddingVector z(6);
      for (auto& v : z) v = n(rng);
      batch.push_back({z, coin(rng) ? 1 : 0});
    }
    CHECK(hypersphere_loss(batch, LossConfig{}) > 0.0);
  }
}

TEST_CASE("monotone in the squared norm") {
  const LossConfig cfg;
  double prev0 = -1.0, prev1 = 1e300;
  for (double r = 1e-3; r < 30.0; r *= 1.3) {
    const double l0 = sample_loss(with_norm_sq(r), 0, cfg);
    const double l1 = sample_loss(with_norm_sq(r), 1, cfg);
    CHECK(l0 > prev0);
    CHECK(l1 < prev1);
    prev0 = l0;
    prev1 = l1;
  }
}

TEST_CASE("collapsed encoder cost grows without bound") {
  const LossConfig cfg;
  double prev = 0.0;
  for (double r : {1.0, 1e-1, 1e-2, 1e-4, 1e-8}) {
    const EmbeddingVector v = with_norm_sq(r);
    const std::vector<LabeledEmbedding> batch{{v, 0}, {v, 1}};
    const double bound = cfg.weight_anomaly * -std::log(1.0 - std::exp(-r)) / 2.0;
    CHECK(hypersphere_loss(batch, cfg) >= bound);
    CHECK(bound > prev);
    prev = bound;
  }
}

TEST_CASE("analytic z-gradient matches central differences") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  const LossConfig cfg;
  const double h = 1e-4;
  for (int t = 0; t < 200; ++t) {
    EmbeddingVector z(5);
    for (auto& v : z) v = n(rng);
    for (int y : {0, 1}) {
      const Vector g = sample_loss_gradient(z, y, cfg);
      for (long i = 0; i < z.size(); ++i) {
        EmbeddingVector up = z, down = z;
        up(i) += h;
        down(i) -= h;
        const double numeric = (sample_loss(up, y, cfg) - sample_loss(down, y, cfg)) / (2 * h);
        CHECK(oracle::relative_error(g(i), numeric, 1e-8) <= 1e-4);
      }
    }
  }
  CHECK(sample_loss_gradient(EmbeddingVector::Zero(3), 1, cfg).isZero(0.0));
}

TEST_CASE("sigmoid cross-entropy reference") {
  const oracle::LinearHead head{{1.0, 0.0}, 0.0};
  using Batch = std::vector<std::pair<std::vector<double>, int>>;
  CHECK(oracle::bce_reference_loss(Batch{{{0.0, 0.0}, 1}}, head, 1.0, 1.0) ==
        doctest::Approx(std::log(2.0)));
  CHECK(oracle::bce_reference_loss(Batch{{{60.0, 0.0}, 1}}, head, 1.0, 1.0) < 1e-25);
  CHECK_THROWS_AS(oracle::bce_reference_loss(Batch{}, head), std::invalid_argument);
}

TEST_CASE("hypersphere loss equals sigmoid cross-entropy under |z|^2 = softplus(logit)") {
  // l(z) = exp(-|z|^2) = 1 - sigmoid(t) when |z|^2 = softplus(t).
  const LossConfig cfg;
  for (double t = -8.0; t <= 8.0; t += 0.25) {
    const EmbeddingVector z = with_norm_sq(oracle::softplus(t), 3);
    for (int y : {0, 1}) {
      const std::vector<LabeledEmbedding> batch{{z, y}};
      CHECK(hypersphere_loss(batch, cfg) ==
            doctest::Approx(oracle::bce_logit_loss(t, y)).epsilon(1e-10));
    }
  }
}

TEST_CASE("half-space versus sphere decision regions") {
  // A linear head classifies z and -z on opposite sides; the radial score
  // cannot, since it depends on |z| alone.
  const oracle::LinearHead head{{1.0, 0.0}, 0.0};
  using Batch = std::vector<std::pair<std::vector<double>, int>>;
  const double pos = oracle::bce_reference_loss(Batch{{{3.0, 0.0}, 1}}, head, 1.0, 1.0);
  const double neg = oracle::bce_reference_loss(Batch{{{-3.0, 0.0}, 1}}, head, 1.0, 1.0);
  CHECK(neg > pos + 2.0);
  const EmbeddingVector z = with_norm_sq(9.0, 2);
  CHECK(sample_loss(z, 1, LossConfig{}) == sample_loss(-z, 1, LossConfig{}));
}
