#include "logsy/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace logsy {

void LossConfig::validate() const {
  if (!(weight_normal > 0.0) || !(weight_anomaly > 0.0)) {
    throw std::invalid_argument("loss config: class weights must be positive");
  }
  if (!(clamp_eps > 0.0 && clamp_eps < 1.0)) {
    throw std::invalid_argument("loss config: clamp epsilon must be in (0,1)");
  }
}

double radial_score(const EmbeddingVector& z) { return std::exp(-z.squaredNorm()); }

double anomaly_score(const EmbeddingVector& z) { return z.squaredNorm(); }

double sample_loss(const EmbeddingVector& z, int y, const LossConfig& cfg) {
  const double s = z.squaredNorm();
  if (y == 0) return cfg.weight_normal * s;
  // 1 - exp(-s) without cancellation for small s.
  const double outside = -std::expm1(-s);
  return cfg.weight_anomaly * -std::log(std::max(outside, cfg.clamp_eps));
}

Vector sample_loss_gradient(const EmbeddingVector& z, int y, const LossConfig& cfg) {
  const double s = z.squaredNorm();
  if (y == 0) return (2.0 * cfg.weight_normal) * z;
  const double outside = -std::expm1(-s);
  if (outside <= cfg.clamp_eps) return Vector::Zero(z.size());
  // d/ds -log(1 - e^{-s}) = -1 / (e^s - 1)
  const double d_ds = -1.0 / std::expm1(s);
  return (2.0 * cfg.weight_anomaly * d_ds) * z;
}

double hypersphere_loss(std::span<const LabeledEmbedding> batch,
                        const LossConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("hypersphere_loss: empty batch");
  double total = 0.0;
  for (const auto& item : batch) {
    if (item.y != 0 && item.y != 1) {
      throw std::invalid_argument("hypersphere_loss: labels must be 0 or 1");
    }
    total += sample_loss(item.z, item.y, cfg);
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace logsy
