#include "logsy/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logsy/objective.hpp"
#include "tensor_bytes.hpp"

namespace logsy {

namespace {

constexpr std::string_view kMagic = "LOGSYBND";
constexpr std::size_t kPreambleSize = 16;

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
  return {{"d", c.d},
          {"heads", c.heads},
          {"layers", c.layers},
          {"max_len", c.max_len},
          {"ffn_width", c.ffn_width},
          {"dropout", c.dropout}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d = j.at("d").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.ffn_width = j.at("ffn_width").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

std::uint64_t read_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(v & 0xFFu));
    v >>= 8;
  }
}

}  // namespace

EmbeddingVector embed_message(std::string_view raw_text, const ModelBundle& bundle) {
  return forward(encode_message(raw_text, bundle.vocab, bundle.config().max_len),
                 bundle.params);
}

AnomalyVerdict score_message(std::string_view raw_text, const ModelBundle& bundle,
                             std::optional<double> threshold) {
  const auto t = threshold ? threshold : bundle.threshold;
  if (!t) {
    throw std::invalid_argument(
        "no anomaly threshold: the bundle stores none, pass one explicitly");
  }
  AnomalyVerdict v;
  v.score = anomaly_score(embed_message(raw_text, bundle));
  v.threshold_used = *t;
  v.is_anomaly = v.score > *t;
  return v;
}

SweepResult sweep_threshold(std::span<const ScoredLabel> scores) {
  std::size_t positives = 0;
  for (const auto& s : scores) positives += s.anomaly ? 1 : 0;
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("sweep_threshold: need both anomalous and normal labels");
  }

  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });

  SweepResult result;
  auto evaluate = [&](double threshold, std::size_t flagged_pos, std::size_t flagged_neg) {
    MetricsReport m = metrics_from_counts(flagged_pos, flagged_neg, negatives - flagged_neg,
                                          positives - flagged_pos);
    m.threshold = threshold;
    if (result.curve.empty() || m.f1 > result.best.f1) {
      result.best = m;
      result.best_threshold = threshold;
    }
    result.curve.push_back(m);
  };

  // Below the minimum: everything is flagged.
  const double lowest = sorted.front().score;
  evaluate(lowest - std::max(1.0, std::abs(lowest)), positives, negatives);

  // Walk distinct values; after consuming a group, everything above it is flagged.
  std::size_t below_pos = 0, below_neg = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double value = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == value) {
      (sorted[i].anomaly ? below_pos : below_neg)++;
      ++i;
    }
    double threshold = value;
    if (i < sorted.size()) {
      const double next = sorted[i].score;
      threshold = value + (next - value) / 2.0;
      if (!(threshold < next)) threshold = value;
    }
    evaluate(threshold, positives - below_pos, negatives - below_neg);
  }
  return result;
}

std::string serialize_bundle(const ModelBundle& bundle) {
  const std::string payload = detail::params_payload(bundle.params);

  json tensors = json::array();
  std::uint64_t offset = 0;
  bundle.params.for_each_tensor([&](const std::string& name, const Matrix& m) {
    tensors.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * 8u;
  });

  json meta = {{"seed", bundle.metadata.seed},
               {"train_fraction", bundle.metadata.train_fraction},
               {"auxiliary_count", bundle.metadata.auxiliary_count},
               {"dataset_digest", bundle.metadata.dataset_digest},
               {"threshold_source", bundle.metadata.threshold_source},
               {"extra", bundle.metadata.extra}};

  json header = {{"format", "logsy-bundle"},
                 {"format_version", kBundleFormatVersion},
                 {"config", config_to_json(bundle.config())},
                 {"vocabulary", bundle.vocab.tokens()},
                 {"threshold", bundle.threshold ? json(*bundle.threshold) : json(nullptr)},
                 {"metadata", meta},
                 {"dtype", "float64-le"},
                 {"layout", "row-major"},
                 {"tensors", tensors},
                 {"payload_bytes", payload.size()},
                 {"checksum", {{"algorithm", "crc32"},
                               {"value", detail::hex32(detail::crc32_of(payload))}}}};
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(kPreambleSize + header_text.size() + payload.size());
  out.append(kMagic);
  append_u64_le(out, header_text.size());
  out.append(header_text);
  out.append(payload);
  return out;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  const std::string bytes = serialize_bundle(bundle);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BundleError("cannot write bundle: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw BundleError("short write to bundle: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelBundle deserialize_bundle(std::string_view bytes) {
  if (bytes.size() < kPreambleSize || bytes.substr(0, kMagic.size()) != kMagic) {
    throw BundleError("not a logsy model bundle (bad magic)");
  }
  const std::uint64_t header_len = read_u64_le(bytes.data() + 8);
  if (header_len > bytes.size() - kPreambleSize) {
    throw BundleError("checksum failure: bundle header truncated");
  }
  json header;
  try {
    header = json::parse(bytes.substr(kPreambleSize, header_len));
  } catch (const json::exception& e) {
    throw BundleError(std::string("corrupted bundle header: ") + e.what());
  }

  try {
    const auto version = header.at("format_version").get<std::int64_t>();
    if (version != static_cast<std::int64_t>(kBundleFormatVersion)) {
      throw BundleError("unsupported bundle format_version " + std::to_string(version) +
                        " (this build reads format_version " +
                        std::to_string(kBundleFormatVersion) + ")");
    }

    const std::string_view payload = bytes.substr(kPreambleSize + header_len);
    const auto payload_bytes = header.at("payload_bytes").get<std::uint64_t>();
    if (payload.size() != payload_bytes) {
      throw BundleError("checksum failure: payload holds " + std::to_string(payload.size()) +
                        " bytes, header declares " + std::to_string(payload_bytes));
    }
    const auto& checksum = header.at("checksum");
    if (checksum.at("algorithm").get<std::string>() != "crc32") {
      throw BundleError("unsupported checksum algorithm");
    }
    const std::string actual = detail::hex32(detail::crc32_of(payload));
    if (actual != checksum.at("value").get<std::string>()) {
      throw BundleError("checksum failure: payload crc32 " + actual + " != header " +
                        checksum.at("value").get<std::string>());
    }

    ModelBundle b;
    b.vocab = Vocabulary::from_tokens(header.at("vocabulary").get<std::vector<std::string>>());
    const ModelConfig cfg = config_from_json(header.at("config"));
    cfg.validate();
    b.params = init_params(cfg, b.vocab.size(), 0);
    if (!header.at("threshold").is_null()) b.threshold = header.at("threshold").get<double>();

    const auto& meta = header.at("metadata");
    b.metadata.seed = meta.at("seed").get<std::uint64_t>();
    b.metadata.train_fraction = meta.at("train_fraction").get<double>();
    b.metadata.auxiliary_count = meta.at("auxiliary_count").get<std::uint64_t>();
    b.metadata.dataset_digest = meta.at("dataset_digest").get<std::string>();
    b.metadata.threshold_source = meta.at("threshold_source").get<std::string>();
    b.metadata.extra = meta.at("extra").get<std::map<std::string, std::string>>();

    const auto& table = header.at("tensors");
    std::size_t idx = 0;
    b.params.for_each_tensor([&](const std::string& name, Matrix& m) {
      if (idx >= table.size()) throw BundleError("tensor table is missing " + name);
      const auto& entry = table[idx++];
      if (entry.at("name").get<std::string>() != name ||
          entry.at("rows").get<Eigen::Index>() != m.rows() ||
          entry.at("cols").get<Eigen::Index>() != m.cols()) {
        throw BundleError("tensor table entry " + entry.dump() + " does not match " + name);
      }
      const auto off = entry.at("offset").get<std::uint64_t>();
      const auto len = static_cast<std::uint64_t>(m.size()) * 8u;
      if (off + len > payload.size()) throw BundleError("tensor " + name + " exceeds payload");
      const char* p = payload.data() + off;
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c, p += 8) m(r, c) = detail::read_f64_le(p);
    });
    if (idx != table.size()) throw BundleError("tensor table has unexpected extra entries");
    return b;
  } catch (const json::exception& e) {
    throw BundleError(std::string("malformed bundle header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw BundleError(std::string("invalid bundle contents: ") + e.what());
  }
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError("cannot read model bundle: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_bundle(buf.str());
}

}  // namespace logsy
