#pragma once

#include <span>

#include "logsy/encoder.hpp"

namespace logsy {

struct LossConfig {
  double weight_normal = 0.5;
  double weight_anomaly = 1.0;
  double clamp_eps = 1e-12;  // lower bound on 1 - exp(-|z|^2) inside the log

  void validate() const;
};

struct LabeledEmbedding {
  EmbeddingVector z;
  int y = 0;
};

/// Gaussian radial basis exp(-|z|^2): 1 at the centre, 0+ far away.
double radial_score(const EmbeddingVector& z);

/// A(x) = |z|^2, the squared distance from the centre c = 0.
double anomaly_score(const EmbeddingVector& z);

/// Per-sample hyperspherical loss, before batch averaging:
///   y = 0:  w0 * |z|^2
///   y = 1:  w1 * -log(max(1 - exp(-|z|^2), eps))
double sample_loss(const EmbeddingVector& z, int y, const LossConfig& cfg);

/// d(sample_loss)/dz. Zero inside the clamped region.
Vector sample_loss_gradient(const EmbeddingVector& z, int y, const LossConfig& cfg);

/// Mean of sample_loss over the batch. Throws on an empty batch.
double hypersphere_loss(std::span<const LabeledEmbedding> batch,
                        const LossConfig& cfg);

}  // namespace logsy
