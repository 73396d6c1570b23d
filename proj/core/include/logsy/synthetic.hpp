#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "logsy/log_ingest.hpp"

namespace logsy {

/// Desk-scale stand-in for a target system plus unrelated auxiliary systems.
///
/// Every template is "<verb> <connector> <noun> <slot>" where the slot is a
/// digit-bearing variable (integer, hex id, node name, IP or path) that the
/// tokenizer removes. Target normal templates combine target verbs and nouns;
/// a held-out set of such combinations appears only in the test window.
/// Anomaly templates pair a fault word with a target noun. Auxiliary systems
/// use their own verbs and nouns plus a few nouns shared with the target, and a
/// share of their templates also carry fault words, the way ordinary logs of
/// other systems mention errors. Without shared nouns a model can separate the
/// classes by noun alone and miss fault words paired with target nouns.
struct SyntheticSpec {
  std::uint64_t seed = 7;

  std::size_t train_normal = 5000;
  std::size_t train_anomalies = 250;  // interleaved into the train window
  std::size_t test_count = 2000;
  double test_anomaly_rate = 0.1;
  double unseen_template_rate = 0.25;  // share of test normals from unseen templates
  std::size_t auxiliary_count = 5000;

  std::size_t seen_templates = 40;
  std::size_t unseen_templates = 30;
  std::size_t anomaly_templates = 20;
  std::size_t auxiliary_systems = 3;
  std::size_t templates_per_auxiliary_system = 30;
  double auxiliary_fault_share = 0.3;
  std::size_t shared_nouns = 4;  // target nouns also used by every auxiliary system

  void validate() const;  // throws std::invalid_argument
};

SyntheticSpec synthetic_spec_from_json(std::string_view text);
std::string to_json(const SyntheticSpec& spec);

struct SyntheticCorpus {
  std::vector<LogRecord> target;     // train window first, then test window
  std::vector<LogRecord> auxiliary;  // all labeled Normal
  std::size_t train_window = 0;
  /// Template id of each target record: [0, seen) seen normal templates,
  /// [seen, seen + unseen) held-out normal templates, the rest anomalies.
  std::vector<std::size_t> target_template;
  std::size_t seen_templates = 0;
  std::size_t unseen_templates = 0;

  double train_fraction() const {
    return static_cast<double>(train_window) / static_cast<double>(target.size());
  }
};

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec);

/// Writes target.log and aux.log in dash-sentinel format plus meta.json.
void write_synthetic(const SyntheticCorpus& corpus, const SyntheticSpec& spec,
                     const std::filesystem::path& dir);

}  // namespace logsy
