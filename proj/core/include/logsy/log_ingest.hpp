#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logsy {

enum class Origin : std::uint8_t { Target, Auxiliary };
enum class Label : std::uint8_t { Normal, Anomaly, Unknown };

/// How ground-truth labels are encoded in a log file.
///
///  - DashSentinel: first whitespace-delimited field is the label; `-` means
///    Normal, anything else (e.g. `KERNDTLB`) means Anomaly. The field is
///    stripped from the message text. This is the convention of the public
///    supercomputer logs (Blue Gene/L, Thunderbird, Spirit).
///  - Csv: `<label>,<message>` with label `0` (Normal) or `1` (Anomaly).
///  - Unlabeled: the whole line is the message; label is Unknown.
enum class LabelFormat : std::uint8_t { DashSentinel, Csv, Unlabeled };

LabelFormat parse_label_format(std::string_view name);
std::string_view to_string(LabelFormat format);
std::string_view to_string(Label label);

struct LogRecord {
  std::uint64_t seq_index = 0;  // 1-based line number in the source file
  std::string raw_text;
  Origin origin = Origin::Target;
  Label label = Label::Unknown;
};

struct LoadedLog {
  std::vector<LogRecord> records;
  std::size_t malformed_labels = 0;
};

/// Replaces every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

/// Parses one line. Returns false when the label field is malformed; the
/// record is still filled in with label Unknown.
bool parse_labeled_line(std::string_view line, LabelFormat format,
                        LogRecord& out);

LoadedLog load_labeled_log(const std::filesystem::path& path,
                           LabelFormat format,
                           Origin origin = Origin::Target);

struct SplitSpec {
  double train_fraction = 0.2;
  std::size_t auxiliary_count = 0;
  std::uint64_t seed = 0;
};

struct TargetSplit {
  std::vector<LogRecord> train;
  std::vector<LogRecord> test;
};

/// First floor(n * train_fraction) records go to train, the rest to test.
/// Throws std::invalid_argument on empty input or an empty side.
TargetSplit time_ordered_split(std::span<const LogRecord> records,
                               const SplitSpec& spec);

struct TrainingExample {
  LogRecord record;
  int y = 0;  // 0 = target (normal), 1 = auxiliary or labeled anomaly
};

struct Dataset {
  std::vector<TrainingExample> train;
  std::vector<LogRecord> test;

  std::size_t count_class(int y) const;
};

/// All Normal/Unknown target records with y=0 plus m auxiliary records sampled
/// without replacement with y=1, shuffled with `seed`. Anomaly-labeled target
/// records are dropped. Auxiliary records labeled Anomaly are excluded from
/// the sampling pool.
Dataset build_training_set(std::span<const LogRecord> train_target,
                           std::span<const LogRecord> auxiliary,
                           std::size_t m, std::uint64_t seed);

/// Appends floor(fraction * |labeled_anomalies|) of the given target anomaly
/// records with y=1 (the first ones, in time order).
Dataset inject_expert_labels(Dataset dataset,
                             std::span<const LogRecord> labeled_anomalies,
                             double fraction);

/// Anomaly-labeled records of a target train window, in order.
std::vector<LogRecord> anomalies_in(std::span<const LogRecord> records);

}  // namespace logsy
