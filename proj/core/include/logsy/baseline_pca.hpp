#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "logsy/detector.hpp"
#include "logsy/log_ingest.hpp"
#include "logsy/metrics.hpp"

namespace logsy {

using SparseVector = Eigen::SparseVector<double>;

/// TF-IDF over preprocessed tokens. tf is the raw term count, idf uses the
/// smoothed form ln((1 + D) / (1 + df)) + 1, and vectors are L2-normalized.
/// Terms unseen at fit time are ignored by transform.
class TfidfModel {
 public:
  std::size_t dimension() const { return idf_.size(); }
  const std::vector<double>& idf() const { return idf_; }
  std::optional<std::size_t> index_of(const std::string& term) const;

  SparseVector transform(std::span<const std::string> tokens) const;

  friend std::pair<TfidfModel, std::vector<SparseVector>> tfidf_fit_transform(
      std::span<const std::vector<std::string>> documents);

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> idf_;
};

/// Throws std::invalid_argument on an empty corpus.
std::pair<TfidfModel, std::vector<SparseVector>> tfidf_fit_transform(
    std::span<const std::vector<std::string>> documents);

struct PcaDetector {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;   // D x k, orthonormal columns
  Eigen::VectorXd eigenvalues;  // all D, non-increasing
  std::size_t k = 0;

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
};

struct PcaOptions {
  double variance_fraction = 0.95;
  std::optional<std::size_t> fixed_k;  // overrides variance_fraction
  /// Evaluation drivers leave train records labeled Anomaly out of the fit, the
  /// same data the encoder trains on. When false every train record is used and
  /// labels are ignored, the classic unsupervised setting.
  bool fit_normals_only = true;
};

/// Centers the data and keeps the top principal axes of the sample covariance:
/// the smallest k whose eigenvalues reach variance_fraction of the total.
/// Zero-variance data gives k = 0. Needs at least two vectors.
PcaDetector pca_fit(std::span<const Eigen::VectorXd> vectors, const PcaOptions& opts = {});
PcaDetector pca_fit(std::span<const SparseVector> vectors, std::size_t dimension,
                    const PcaOptions& opts = {});

struct PcaSplit {
  double projection_sq = 0.0;  // |P P^T (v - mean)|^2
  double residual_sq = 0.0;    // |(I - P P^T)(v - mean)|^2
};

PcaSplit pca_decompose(const PcaDetector& detector, const Eigen::VectorXd& v);

/// Squared length of v - mean on the residual subspace.
double pca_score(const PcaDetector& detector, const Eigen::VectorXd& v);
double pca_score(const PcaDetector& detector, const SparseVector& v);

struct PcaEvaluation {
  SweepResult sweep;  // best-F1 over the labeled test records
  std::size_t k = 0;
  std::size_t dimension = 0;
};

/// The classic baseline: TF-IDF vectors of the target train window fitted by
/// PCA, test records scored by residual length.
PcaEvaluation pca_with_tfidf(std::span<const LogRecord> train,
                             std::span<const LogRecord> test, const PcaOptions& opts = {});

/// Same detector, with Logsy embeddings in place of TF-IDF vectors.
PcaEvaluation pca_with_embeddings(const ModelBundle& bundle, std::span<const LogRecord> train,
                                  std::span<const LogRecord> test,
                                  const PcaOptions& opts = {});

}  // namespace logsy
