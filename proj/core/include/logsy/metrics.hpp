#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>

namespace logsy {

/// Confusion counts and derived scores. The positive class is "anomaly".
/// Degenerate ratios (0/0) are reported as 0.
struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();

  std::size_t total() const { return tp + fp + tn + fn; }
  std::string to_json() const;  // one compact JSON object
};

struct Outcome {
  bool predicted_anomaly = false;
  bool actual_anomaly = false;
};

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn,
                                  std::size_t fn);

MetricsReport compute_metrics(std::span<const Outcome> outcomes);

}  // namespace logsy
