#include <doctest.h>

#include <cmath>
#include <random>

#include "logsy/baseline_pca.hpp"
#include "oracles.hpp"

using namespace logsy;
using Docs = std::vector<std::vector<std::string>>;

namespace {

std::vector<Eigen::VectorXd> on_diagonal() {
  std::vector<Eigen::VectorXd> pts;
  for (double t : {-2.0, -1.0, 1.0, 2.0}) pts.push_back(Eigen::Vector2d(t, t));
  return pts;
}

std::vector<Eigen::VectorXd> random_cloud(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd mix(dim, dim);
  for (long i = 0; i < mix.size(); ++i) mix.data()[i] = g(rng);
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(dim);
    for (auto& x : v) x = g(rng);
    out.push_back(mix * v + Eigen::VectorXd::Constant(dim, 3.0));
  }
  return out;
}

}  // namespace

TEST_CASE("tf-idf weights") {
  const Docs docs{{"disk", "full"}, {"disk", "ok", "ok"}, {"disk", "error"}};
  auto [model, vecs] = tfidf_fit_transform(docs);
  CHECK(model.dimension() == 4);
  const auto disk = *model.index_of("disk");
  CHECK(model.idf()[disk] == 1.0);
  const auto ok = *model.index_of("ok");
  CHECK(model.idf()[ok] == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
  for (double idf : model.idf()) CHECK(idf >= 0.0);

  // Second document: raw counts disk=1, ok=2 before normalization.
  const double w_ok = 2.0 * model.idf()[ok];
  const double norm = std::sqrt(1.0 + w_ok * w_ok);
  CHECK(vecs[1].coeff(static_cast<long>(disk)) == doctest::Approx(1.0 / norm));
  CHECK(vecs[1].coeff(static_cast<long>(ok)) == doctest::Approx(w_ok / norm));
  for (const auto& v : vecs) CHECK(v.norm() == doctest::Approx(1.0));

  CHECK(model.transform(std::vector<std::string>{}).nonZeros() == 0);
  CHECK(model.transform(std::vector<std::string>{"never", "seen"}).nonZeros() == 0);
  const std::vector<std::string> msg{"disk", "full"};
  CHECK(Eigen::VectorXd(model.transform(msg)) == Eigen::VectorXd(vecs[0]));
  CHECK_FALSE(model.index_of("never").has_value());
  CHECK_THROWS_AS(tfidf_fit_transform(Docs{}), std::invalid_argument);
}

TEST_CASE("transforming test messages does not alter training statistics") {
  const Docs docs{{"a", "b"}, {"b", "c"}};
  auto [model, vecs] = tfidf_fit_transform(docs);
  const auto idf = model.idf();
  (void)model.transform(std::vector<std::string>{"c", "c", "z"});
  CHECK(model.idf() == idf);
  CHECK(model.dimension() == 3);
}

TEST_CASE("pca on a line") {
  const auto pts = on_diagonal();
  const PcaDetector det = pca_fit(pts);
  REQUIRE(det.k == 1);
  const Eigen::Vector2d axis = det.components.col(0);
  CHECK(std::abs(std::abs(axis(0)) - 1.0 / std::sqrt(2.0)) < 1e-12);
  CHECK(axis(0) * axis(1) > 0.0);
  CHECK(det.mean.norm() < 1e-15);
  CHECK(pca_score(det, Eigen::VectorXd(Eigen::Vector2d(5.0, 5.0))) < 1e-20);
  CHECK(pca_score(det, Eigen::VectorXd(Eigen::Vector2d(1.0, -1.0))) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(pca_score(det, Eigen::VectorXd(Eigen::Vector2d(2.0, -2.0))) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK_THROWS_AS(pca_score(det, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("pca edge cases") {
  std::vector<Eigen::VectorXd> same(4, Eigen::Vector3d(1.0, 2.0, 3.0));
  const PcaDetector flat = pca_fit(same);
  CHECK(flat.k == 0);
  CHECK(pca_score(flat, Eigen::VectorXd(Eigen::Vector3d(1.0, 2.0, 5.0))) == doctest::Approx(4.0));

  CHECK_THROWS_AS(pca_fit(std::vector<Eigen::VectorXd>{Eigen::Vector2d(1, 1)}), std::invalid_argument);
  std::vector<Eigen::VectorXd> bad = on_diagonal();
  bad[1](0) = std::nan("");
  CHECK_THROWS_AS(pca_fit(bad), std::invalid_argument);
  PcaOptions o;
  o.variance_fraction = 0.0;
  CHECK_THROWS_AS(pca_fit(on_diagonal(), o), std::invalid_argument);
  o.fixed_k = 2;
  CHECK(pca_fit(on_diagonal(), o).k == 2);
}

TEST_CASE("pca invariants on random clouds") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cloud = random_cloud(rng, 40, 6);
    PcaOptions opts;
    opts.variance_fraction = 0.8;
    const PcaDetector det = pca_fit(cloud, opts);
    const Eigen::MatrixXd gram = det.components.transpose() * det.components;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <= 1e-8);
    for (long i = 1; i < det.eigenvalues.size(); ++i) CHECK(det.eigenvalues(i) <= det.eigenvalues(i - 1));
    // k is the smallest prefix reaching the fraction.
    const double total = det.eigenvalues.sum();
    CHECK(det.eigenvalues.head(static_cast<long>(det.k)).sum() >= 0.8 * total);
    CHECK(det.eigenvalues.head(static_cast<long>(det.k) - 1).sum() < 0.8 * total);
    for (const auto& v : random_cloud(rng, 10, 6)) {
      const PcaSplit s = pca_decompose(det, v);
      const double full = (v - det.mean).squaredNorm();
      CHECK(std::abs(s.projection_sq + s.residual_sq - full) <= 1e-9 * std::max(1.0, full));
      CHECK(pca_score(det, 2.0 * (v - det.mean) + det.mean) == doctest::Approx(4.0 * s.residual_sq));
    }
  }
}

TEST_CASE("sparse and dense fits agree") {
  const Docs docs{{"a", "b"}, {"b", "c", "c"}, {"a", "d"}, {"d"}, {"a", "b", "c", "d"}};
  auto [model, vecs] = tfidf_fit_transform(docs);
  std::vector<Eigen::VectorXd> dense;
  for (const auto& v : vecs) dense.push_back(Eigen::VectorXd(v));
  const PcaDetector a = pca_fit(vecs, model.dimension());
  const PcaDetector b = pca_fit(dense);
  CHECK(a.k == b.k);
  CHECK((a.mean - b.mean).norm() < 1e-14);
  CHECK((a.eigenvalues - b.eigenvalues).norm() < 1e-12);
  for (const auto& v : vecs) CHECK(pca_score(a, v) == doctest::Approx(pca_score(b, Eigen::VectorXd(v))).epsilon(1e-9));
}

TEST_CASE("tf-idf pca separates a linearly separable corpus") {
  std::vector<LogRecord> train, test;
  const std::vector<std::string> normal{"session opened user", "session closed user",
                                        "user login accepted", "user logout completed"};
  for (std::uint64_t i = 0; i < 200; ++i) train.push_back({i + 1, normal[i % 4], Origin::Target, Label::Normal});
  for (std::uint64_t i = 0; i < 100; ++i) {
    const bool anomaly = i % 10 == 0;
    test.push_back({i + 201, anomaly ? "disk controller fault detected" : normal[i % 4], Origin::Target,
                    anomaly ? Label::Anomaly : Label::Normal});
  }
  test.push_back({999, "unlabeled", Origin::Target, Label::Unknown});
  const PcaEvaluation eval = pca_with_tfidf(train, test);
  CHECK(eval.sweep.best.f1 == 1.0);
  CHECK(eval.sweep.best.total() == 100);
  CHECK(eval.dimension == 8);
}

TEST_CASE("fit set of the evaluation drivers") {
  // Train window holds a rare fault message; the test window repeats it.
  std::vector<LogRecord> train, test;
  const std::vector<std::string> normal{"session opened user", "session closed user",
                                        "user login accepted", "user logout completed"};
  for (std::uint64_t i = 0; i < 200; ++i) {
    const bool fault = i % 40 == 0;
    train.push_back({i + 1, fault ? "disk controller fault" : normal[i % 4], Origin::Target,
                     fault ? Label::Anomaly : Label::Normal});
  }
  for (std::uint64_t i = 0; i < 40; ++i) {
    const bool fault = i % 8 == 0;
    test.push_back({i + 201, fault ? "disk controller fault" : normal[i % 4], Origin::Target,
                    fault ? Label::Anomaly : Label::Normal});
  }
  const PcaEvaluation normals_only = pca_with_tfidf(train, test);
  CHECK(normals_only.dimension == 8);
  PcaOptions all;
  all.fit_normals_only = false;
  const PcaEvaluation unsupervised = pca_with_tfidf(train, test, all);
  CHECK(unsupervised.dimension == 11);
  CHECK(unsupervised.sweep.best.f1 == 1.0);
}
