#include "logsy/log_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace logsy {

namespace {

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Length of the valid UTF-8 sequence starting at s[i], or 0 if invalid.
std::size_t utf8_sequence_length(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return 1;
  std::size_t len = 0;
  unsigned char lo = 0x80;
  unsigned char hi = 0xBF;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3;
    if (b0 == 0xE0) lo = 0xA0;
    if (b0 == 0xED) hi = 0x9F;  // no surrogates
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4;
    if (b0 == 0xF0) lo = 0x90;
    if (b0 == 0xF4) hi = 0x8F;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    const unsigned char min = (k == 1) ? lo : 0x80;
    const unsigned char max = (k == 1) ? hi : 0xBF;
    if (b < min || b > max) return 0;
  }
  return len;
}

}  // namespace

LabelFormat parse_label_format(std::string_view name) {
  if (name == "dash" || name == "dash-sentinel") return LabelFormat::DashSentinel;
  if (name == "csv") return LabelFormat::Csv;
  if (name == "none" || name == "unlabeled") return LabelFormat::Unlabeled;
  throw std::invalid_argument("unknown label format '" + std::string(name) +
                              "' (expected dash, csv or none)");
}

std::string_view to_string(LabelFormat format) {
  switch (format) {
    case LabelFormat::DashSentinel: return "dash";
    case LabelFormat::Csv: return "csv";
    case LabelFormat::Unlabeled: return "none";
  }
  return "?";
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Normal: return "normal";
    case Label::Anomaly: return "anomaly";
    case Label::Unknown: return "unknown";
  }
  return "?";
}

std::string sanitize_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const std::size_t len = utf8_sequence_length(bytes, i);
    if (len == 0) {
      out.append(kReplacement);
      ++i;
    } else {
      out.append(bytes.substr(i, len));
      i += len;
    }
  }
  return out;
}

bool parse_labeled_line(std::string_view line, LabelFormat format,
                        LogRecord& out) {
  switch (format) {
    case LabelFormat::Unlabeled:
      out.raw_text = std::string(trim(line));
      out.label = Label::Unknown;
      return true;

    case LabelFormat::DashSentinel: {
      std::string_view rest = trim(line);
      std::size_t end = 0;
      while (end < rest.size() && !is_space(rest[end])) ++end;
      const std::string_view field = rest.substr(0, end);
      out.label = (field == "-") ? Label::Normal : Label::Anomaly;
      out.raw_text = std::string(trim(rest.substr(end)));
      return true;
    }

    case LabelFormat::Csv: {
      const std::size_t comma = line.find(',');
      if (comma == std::string_view::npos) {
        out.raw_text = std::string(trim(line));
        out.label = Label::Unknown;
        return false;
      }
      const std::string_view field = trim(line.substr(0, comma));
      out.raw_text = std::string(trim(line.substr(comma + 1)));
      if (field == "0") {
        out.label = Label::Normal;
      } else if (field == "1") {
        out.label = Label::Anomaly;
      } else {
        out.label = Label::Unknown;
        return false;
      }
      return true;
    }
  }
  return false;
}

LoadedLog load_labeled_log(const std::filesystem::path& path,
                           LabelFormat format, Origin origin) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read log file: " + path.string());
  }
  LoadedLog result;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    LogRecord record;
    record.seq_index = line_no;
    record.origin = origin;
    if (!parse_labeled_line(sanitize_utf8(line), format, record)) {
      ++result.malformed_labels;
    }
    result.records.push_back(std::move(record));
  }
  if (in.bad()) {
    throw std::runtime_error("I/O error while reading: " + path.string());
  }
  return result;
}

TargetSplit time_ordered_split(std::span<const LogRecord> records,
                               const SplitSpec& spec) {
  if (records.empty()) {
    throw std::invalid_argument("time_ordered_split: no records");
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("time_ordered_split: train_fraction must be in (0,1)");
  }
  const auto n = records.size();
  // Nudge absorbs representation error such as 0.29 * 100 = 28.999...
  const auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * spec.train_fraction + 1e-9));
  if (n_train == 0 || n_train == n) {
    throw std::invalid_argument(
        "time_ordered_split: fraction " + std::to_string(spec.train_fraction) +
        " of " + std::to_string(n) + " records leaves an empty " +
        (n_train == 0 ? "train" : "test") + " split");
  }
  TargetSplit split;
  split.train.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(records.begin() + static_cast<std::ptrdiff_t>(n_train), records.end());
  return split;
}

std::size_t Dataset::count_class(int y) const {
  return static_cast<std::size_t>(std::count_if(
      train.begin(), train.end(),
      [y](const TrainingExample& e) { return e.y == y; }));
}

Dataset build_training_set(std::span<const LogRecord> train_target,
                           std::span<const LogRecord> auxiliary,
                           std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  pool.reserve(auxiliary.size());
  for (std::size_t i = 0; i < auxiliary.size(); ++i) {
    if (auxiliary[i].label != Label::Anomaly) pool.push_back(i);
  }
  if (m > pool.size()) {
    throw std::invalid_argument(
        "build_training_set: requested m=" + std::to_string(m) +
        " auxiliary samples but the pool holds only " +
        std::to_string(pool.size()));
  }

  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first m entries become the sample.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }

  Dataset ds;
  ds.train.reserve(train_target.size() + m);
  for (const auto& r : train_target) {
    if (r.label == Label::Anomaly) continue;
    LogRecord rec = r;
    rec.origin = Origin::Target;
    ds.train.push_back({std::move(rec), 0});
  }
  for (std::size_t i = 0; i < m; ++i) {
    LogRecord rec = auxiliary[pool[i]];
    rec.origin = Origin::Auxiliary;
    ds.train.push_back({std::move(rec), 1});
  }
  std::shuffle(ds.train.begin(), ds.train.end(), rng);
  return ds;
}

Dataset inject_expert_labels(Dataset dataset,
                             std::span<const LogRecord> labeled_anomalies,
                             double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("inject_expert_labels: fraction must be in [0,1]");
  }
  const auto count = static_cast<std::size_t>(
      fraction * static_cast<double>(labeled_anomalies.size()));
  for (std::size_t i = 0; i < count; ++i) {
    LogRecord rec = labeled_anomalies[i];
    rec.origin = Origin::Target;
    dataset.train.push_back({std::move(rec), 1});
  }
  return dataset;
}

std::vector<LogRecord> anomalies_in(std::span<const LogRecord> records) {
  std::vector<LogRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const LogRecord& r) { return r.label == Label::Anomaly; });
  return out;
}

}  // namespace logsy
