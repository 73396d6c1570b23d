#include "logsy/metrics.hpp"

#include <cmath>

#include <json.hpp>

namespace logsy {

namespace {
double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn,
                                  std::size_t fn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  const auto TP = static_cast<double>(tp);
  r.precision = ratio(TP, TP + static_cast<double>(fp));
  r.recall = ratio(TP, TP + static_cast<double>(fn));
  r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  r.accuracy = ratio(TP + static_cast<double>(tn), static_cast<double>(r.total()));
  return r;
}

MetricsReport compute_metrics(std::span<const Outcome> outcomes) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& o : outcomes) {
    if (o.predicted_anomaly) {
      (o.actual_anomaly ? tp : fp)++;
    } else {
      (o.actual_anomaly ? fn : tn)++;
    }
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

std::string MetricsReport::to_json() const {
  nlohmann::json j = {{"tp", tp},           {"fp", fp},
                      {"tn", tn},           {"fn", fn},
                      {"precision", precision}, {"recall", recall},
                      {"f1", f1},           {"accuracy", accuracy}};
  j["threshold"] = std::isnan(threshold) ? nlohmann::json(nullptr) : nlohmann::json(threshold);
  return j.dump();
}

}  // namespace logsy
