#include "logsy/baseline_pca.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "logsy/tokenizer.hpp"

namespace logsy {

namespace {

PcaDetector from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& cov,
                            const PcaOptions& opts) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("pca_fit: eigen-decomposition failed");
  }
  const auto dim = cov.rows();
  PcaDetector det;
  det.mean = std::move(mean);
  // Eigen returns ascending order.
  det.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd axes = solver.eigenvectors().rowwise().reverse();

  const double total = det.eigenvalues.sum();
  std::size_t k = 0;
  if (opts.fixed_k) {
    k = std::min<std::size_t>(*opts.fixed_k, static_cast<std::size_t>(dim));
  } else if (total > 0.0) {
    double acc = 0.0;
    while (k < static_cast<std::size_t>(dim) && acc < opts.variance_fraction * total) {
      acc += det.eigenvalues(static_cast<Eigen::Index>(k));
      ++k;
    }
  }
  det.k = k;
  det.components = axes.leftCols(static_cast<Eigen::Index>(k));
  return det;
}

void check_options(const PcaOptions& opts) {
  if (!opts.fixed_k && !(opts.variance_fraction > 0.0 && opts.variance_fraction <= 1.0)) {
    throw std::invalid_argument("pca_fit: variance_fraction must be in (0,1]");
  }
}

std::vector<ScoredLabel> labeled_scores(std::span<const LogRecord> test,
                                        const std::vector<double>& scores) {
  std::vector<ScoredLabel> out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].label == Label::Unknown) continue;
    out.push_back({scores[i], test[i].label == Label::Anomaly});
  }
  return out;
}

std::vector<const LogRecord*> fit_records(std::span<const LogRecord> train, const PcaOptions& opts) {
  std::vector<const LogRecord*> out;
  for (const auto& r : train)
    if (!opts.fit_normals_only || r.label != Label::Anomaly) out.push_back(&r);
  return out;
}

}  // namespace

std::optional<std::size_t> TfidfModel::index_of(const std::string& term) const {
  const auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SparseVector TfidfModel::transform(std::span<const std::string> tokens) const {
  std::map<std::size_t, double> counts;
  for (const auto& t : tokens) {
    const auto it = index_.find(t);
    if (it != index_.end()) counts[it->second] += 1.0;
  }
  SparseVector v(static_cast<Eigen::Index>(idf_.size()));
  double norm_sq = 0.0;
  for (auto& [idx, tf] : counts) {
    tf *= idf_[idx];
    norm_sq += tf * tf;
  }
  if (norm_sq == 0.0) return v;
  const double inv = 1.0 / std::sqrt(norm_sq);
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  for (const auto& [idx, w] : counts) v.insert(static_cast<Eigen::Index>(idx)) = w * inv;
  return v;
}

std::pair<TfidfModel, std::vector<SparseVector>> tfidf_fit_transform(
    std::span<const std::vector<std::string>> documents) {
  if (documents.empty()) throw std::invalid_argument("tfidf: empty training corpus");
  TfidfModel model;
  std::vector<std::size_t> df;
  for (const auto& doc : documents) {
    std::vector<std::size_t> seen;
    for (const auto& term : doc) {
      auto [it, inserted] = model.index_.try_emplace(term, model.index_.size());
      if (inserted) df.push_back(0);
      seen.push_back(it->second);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto idx : seen) ++df[idx];
  }
  const double n_docs = static_cast<double>(documents.size());
  model.idf_.resize(df.size());
  for (std::size_t i = 0; i < df.size(); ++i) {
    model.idf_[i] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  std::vector<SparseVector> vectors;
  vectors.reserve(documents.size());
  for (const auto& doc : documents) vectors.push_back(model.transform(doc));
  return {std::move(model), std::move(vectors)};
}

PcaDetector pca_fit(std::span<const Eigen::VectorXd> vectors, const PcaOptions& opts) {
  check_options(opts);
  if (vectors.size() < 2) throw std::invalid_argument("pca_fit: need at least two vectors");
  const auto dim = vectors.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& v : vectors) {
    if (v.size() != dim) throw std::invalid_argument("pca_fit: inconsistent dimensions");
    if (!v.allFinite()) throw std::invalid_argument("pca_fit: non-finite input");
    mean += v;
  }
  mean /= static_cast<double>(vectors.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& v : vectors) {
    const Eigen::VectorXd c = v - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(vectors.size() - 1);
  return from_covariance(std::move(mean), cov, opts);
}

PcaDetector pca_fit(std::span<const SparseVector> vectors, std::size_t dimension,
                    const PcaOptions& opts) {
  check_options(opts);
  if (vectors.size() < 2) throw std::invalid_argument("pca_fit: need at least two vectors");
  const auto dim = static_cast<Eigen::Index>(dimension);
  const double n = static_cast<double>(vectors.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& v : vectors) {
    if (v.size() != dim) throw std::invalid_argument("pca_fit: inconsistent dimensions");
    for (SparseVector::InnerIterator a(v); a; ++a) {
      mean(a.index()) += a.value();
      for (SparseVector::InnerIterator b(v); b; ++b) {
        scatter(a.index(), b.index()) += a.value() * b.value();
      }
    }
  }
  mean /= n;
  // Sum (v - mean)(v - mean)^T = Sum v v^T - n mean mean^T
  Eigen::MatrixXd cov = (scatter - n * mean * mean.transpose()) / (n - 1.0);
  return from_covariance(std::move(mean), cov, opts);
}

PcaSplit pca_decompose(const PcaDetector& det, const Eigen::VectorXd& v) {
  if (v.size() != det.mean.size()) {
    throw std::invalid_argument("pca_score: vector has dimension " + std::to_string(v.size()) +
                                ", detector expects " + std::to_string(det.mean.size()));
  }
  const Eigen::VectorXd centered = v - det.mean;
  const Eigen::VectorXd coords = det.components.transpose() * centered;
  const Eigen::VectorXd residual = centered - det.components * coords;
  return {coords.squaredNorm(), residual.squaredNorm()};
}

double pca_score(const PcaDetector& det, const Eigen::VectorXd& v) {
  return pca_decompose(det, v).residual_sq;
}

double pca_score(const PcaDetector& det, const SparseVector& v) {
  return pca_score(det, Eigen::VectorXd(v));
}

PcaEvaluation pca_with_tfidf(std::span<const LogRecord> train, std::span<const LogRecord> test,
                             const PcaOptions& opts) {
  std::vector<std::vector<std::string>> docs;
  for (const auto* r : fit_records(train, opts)) docs.push_back(preprocess(r->raw_text));
  auto [model, vectors] = tfidf_fit_transform(docs);
  const PcaDetector det = pca_fit(vectors, model.dimension(), opts);

  std::vector<double> scores;
  scores.reserve(test.size());
  for (const auto& r : test) {
    const auto tokens = preprocess(r.raw_text);
    scores.push_back(pca_score(det, model.transform(tokens)));
  }
  PcaEvaluation eval;
  eval.sweep = sweep_threshold(labeled_scores(test, scores));
  eval.k = det.k;
  eval.dimension = det.dimension();
  return eval;
}

PcaEvaluation pca_with_embeddings(const ModelBundle& bundle, std::span<const LogRecord> train,
                                  std::span<const LogRecord> test, const PcaOptions& opts) {
  std::vector<Eigen::VectorXd> vectors;
  for (const auto* r : fit_records(train, opts)) vectors.push_back(embed_message(r->raw_text, bundle));
  const PcaDetector det = pca_fit(vectors, opts);

  std::vector<double> scores;
  scores.reserve(test.size());
  for (const auto& r : test) scores.push_back(pca_score(det, embed_message(r.raw_text, bundle)));
  PcaEvaluation eval;
  eval.sweep = sweep_threshold(labeled_scores(test, scores));
  eval.k = det.k;
  eval.dimension = det.dimension();
  return eval;
}

}  // namespace logsy
