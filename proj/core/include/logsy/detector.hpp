#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "logsy/encoder.hpp"
#include "logsy/metrics.hpp"
#include "logsy/tokenizer.hpp"

namespace logsy {

inline constexpr std::uint32_t kBundleFormatVersion = 1;

/// Raised for unreadable, corrupted, truncated or incompatible bundle files.
class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BundleMetadata {
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
  std::uint64_t auxiliary_count = 0;
  std::string dataset_digest;
  std::string threshold_source;  // "validation-sweep", "explicit" or empty
  std::map<std::string, std::string> extra;

  bool operator==(const BundleMetadata&) const = default;
};

/// Everything needed to score messages offline.
struct ModelBundle {
  Vocabulary vocab;
  ModelParams params;  // carries the ModelConfig
  std::optional<double> threshold;
  BundleMetadata metadata;

  const ModelConfig& config() const { return params.config; }
};

struct AnomalyVerdict {
  double score = 0.0;
  bool is_anomaly = false;
  double threshold_used = 0.0;
};

/// Eval-mode embedding of a raw message.
EmbeddingVector embed_message(std::string_view raw_text, const ModelBundle& bundle);

/// A(x) compared against the threshold with a strict '>'. Uses `threshold`
/// when given, otherwise the bundle's stored one; throws std::invalid_argument
/// when neither exists.
AnomalyVerdict score_message(std::string_view raw_text, const ModelBundle& bundle,
                             std::optional<double> threshold = std::nullopt);

struct ScoredLabel {
  double score = 0.0;
  bool anomaly = false;
};

struct SweepResult {
  double best_threshold = 0.0;
  MetricsReport best;
  std::vector<MetricsReport> curve;  // ascending thresholds
};

/// Evaluates F1 at a threshold below every score, at every midpoint between
/// consecutive distinct scores, and at the maximum score (nothing flagged).
/// Ties go to the lowest threshold. Throws unless both classes are present.
SweepResult sweep_threshold(std::span<const ScoredLabel> scores);

/// Layout (all integers little-endian):
///   8 bytes   magic "LOGSYBND"
///   8 bytes   u64 header length H
///   H bytes   JSON header: format_version, config, vocabulary, threshold,
///             metadata, tensor table {name, rows, cols, offset}, payload size
///             and crc32 of the payload
///   payload   float64 little-endian tensors, row-major, in table order
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
std::string serialize_bundle(const ModelBundle& bundle);

ModelBundle load_bundle(const std::filesystem::path& path);
ModelBundle deserialize_bundle(std::string_view bytes);

}  // namespace logsy
