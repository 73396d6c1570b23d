#include "logsy/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace logsy {

namespace {

struct WordPool {
  std::vector<std::string_view> verbs;
  std::vector<std::string_view> nouns;
};

const WordPool kTargetWords = {
    {"started", "stopped", "allocated", "released", "synchronized", "registered",
     "mounted", "scheduled", "loaded", "flushed", "rotated", "initialized"},
    {"cache", "buffer", "scheduler", "interconnect", "partition", "midplane", "torus",
     "collective", "filesystem", "daemon", "socket", "queue", "bridge", "controller"}};

const std::vector<std::string_view> kFaultWords = {
    "failed", "error", "timeout", "panic", "corrupted", "refused", "fatal", "exception"};

const std::array<WordPool, 3> kAuxiliaryWords = {{
    {{"served", "redirected", "cached", "compressed", "proxied", "authenticated"},
     {"request", "session", "cookie", "header", "endpoint", "upstream", "certificate"}},
    {{"committed", "vacuumed", "replicated", "indexed", "checkpointed", "analyzed"},
     {"transaction", "tablespace", "replica", "index", "snapshot", "tuple", "wal"}},
    {{"queued", "dispatched", "completed", "archived", "submitted", "reaped"},
     {"job", "worker", "artifact", "pipeline", "stage", "lease", "manifest"}},
}};

const std::array<std::string_view, 6> kConnectors = {"", "the", "for", "on", "at", "of"};

struct Template {
  std::string verb;
  std::string connector;
  std::string noun;
  int slot_kind = 0;
  bool capitalized = false;
};

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Distinct (verb, noun) pairs drawn without replacement from the cross product.
std::vector<std::pair<std::size_t, std::size_t>> draw_pairs(std::size_t n_verbs,
                                                            std::size_t n_nouns,
                                                            std::size_t count, Rng& rng,
                                                            const char* what) {
  if (count > n_verbs * n_nouns) {
    throw std::invalid_argument(std::string("synthetic: too many ") + what +
                                " templates for the word pools (max " +
                                std::to_string(n_verbs * n_nouns) + ")");
  }
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t v = 0; v < n_verbs; ++v)
    for (std::size_t n = 0; n < n_nouns; ++n) all.emplace_back(v, n);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return all;
}

Template make_template(std::string_view verb, std::string_view noun, Rng& rng) {
  Template t;
  t.verb = verb;
  t.noun = noun;
  t.connector = kConnectors[pick(rng, kConnectors.size())];
  t.slot_kind = static_cast<int>(pick(rng, 5));
  t.capitalized = pick(rng, 2) == 0;
  return t;
}

std::string render_slot(int kind, const std::string& noun, Rng& rng) {
  std::uniform_int_distribution<int> small(0, 255);
  std::uniform_int_distribution<int> big(0, 99999);
  switch (kind) {
    case 0: return std::to_string(big(rng));
    case 1: {
      static constexpr char kHex[] = "0123456789abcdef";
      std::string s = "0x";
      const int len = 4 + small(rng) % 5;
      for (int i = 0; i < len; ++i) s.push_back(kHex[small(rng) % 16]);
      return s;
    }
    case 2: return "node-" + std::to_string(small(rng));
    case 3:
      return "10." + std::to_string(small(rng)) + "." + std::to_string(small(rng)) + "." +
             std::to_string(small(rng));
    default: return "/var/lib/" + noun + "/" + std::to_string(big(rng));
  }
}

std::string render(const Template& t, std::uint64_t stamp, Rng& rng) {
  std::string verb = t.verb;
  if (t.capitalized && !verb.empty()) verb[0] = static_cast<char>(verb[0] - 'a' + 'A');
  std::string line = std::to_string(stamp) + " " + verb + " ";
  if (!t.connector.empty()) line += t.connector + " ";
  line += t.noun + " " + render_slot(t.slot_kind, t.noun, rng);
  return line;
}

std::size_t rounded(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

// Exactly `count` positions out of n set to true, chosen uniformly.
std::vector<bool> choose_positions(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> chosen(n, false);
  for (std::size_t i = 0; i < count; ++i) chosen[idx[i]] = true;
  return chosen;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto in_unit = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!in_unit(test_anomaly_rate) || !in_unit(unseen_template_rate) ||
      !in_unit(auxiliary_fault_share)) {
    throw std::invalid_argument("synthetic: rates must lie in [0,1]");
  }
  if (seen_templates == 0) throw std::invalid_argument("synthetic: empty target template pool");
  if (unseen_template_rate > 0.0 && unseen_templates == 0) {
    throw std::invalid_argument("synthetic: unseen_template_rate > 0 needs unseen templates");
  }
  if ((test_anomaly_rate > 0.0 || train_anomalies > 0) && anomaly_templates == 0) {
    throw std::invalid_argument("synthetic: anomalies requested but the anomaly pool is empty");
  }
  if (auxiliary_count > 0 && (auxiliary_systems == 0 || templates_per_auxiliary_system == 0)) {
    throw std::invalid_argument("synthetic: empty auxiliary template pool");
  }
  if (auxiliary_systems > kAuxiliaryWords.size()) {
    throw std::invalid_argument("synthetic: at most " + std::to_string(kAuxiliaryWords.size()) +
                                " auxiliary systems are available");
  }
  if (shared_nouns > kTargetWords.nouns.size()) {
    throw std::invalid_argument("synthetic: at most " + std::to_string(kTargetWords.nouns.size()) +
                                " nouns can be shared");
  }
  if (train_normal == 0 || test_count == 0) {
    throw std::invalid_argument("synthetic: train and test windows must be non-empty");
  }
}

SyntheticSpec synthetic_spec_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  SyntheticSpec s;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::array<std::string_view, 15> kKeys = {
        "seed", "train_normal", "train_anomalies", "test_count", "test_anomaly_rate",
        "unseen_template_rate", "auxiliary_count", "seen_templates", "unseen_templates",
        "anomaly_templates", "auxiliary_systems", "templates_per_auxiliary_system",
        "auxiliary_fault_share", "shared_nouns", "comment"};
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end()) {
      throw std::invalid_argument("synthetic spec: unknown key '" + it.key() + "'");
    }
  }
  get("seed", s.seed);
  get("train_normal", s.train_normal);
  get("train_anomalies", s.train_anomalies);
  get("test_count", s.test_count);
  get("test_anomaly_rate", s.test_anomaly_rate);
  get("unseen_template_rate", s.unseen_template_rate);
  get("auxiliary_count", s.auxiliary_count);
  get("seen_templates", s.seen_templates);
  get("unseen_templates", s.unseen_templates);
  get("anomaly_templates", s.anomaly_templates);
  get("auxiliary_systems", s.auxiliary_systems);
  get("templates_per_auxiliary_system", s.templates_per_auxiliary_system);
  get("auxiliary_fault_share", s.auxiliary_fault_share);
  get("shared_nouns", s.shared_nouns);
  s.validate();
  return s;
}

std::string to_json(const SyntheticSpec& s) {
  nlohmann::json j = {{"seed", s.seed},
                      {"train_normal", s.train_normal},
                      {"train_anomalies", s.train_anomalies},
                      {"test_count", s.test_count},
                      {"test_anomaly_rate", s.test_anomaly_rate},
                      {"unseen_template_rate", s.unseen_template_rate},
                      {"auxiliary_count", s.auxiliary_count},
                      {"seen_templates", s.seen_templates},
                      {"unseen_templates", s.unseen_templates},
                      {"anomaly_templates", s.anomaly_templates},
                      {"auxiliary_systems", s.auxiliary_systems},
                      {"templates_per_auxiliary_system", s.templates_per_auxiliary_system},
                      {"auxiliary_fault_share", s.auxiliary_fault_share},
                      {"shared_nouns", s.shared_nouns}};
  return j.dump(2);
}

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Target templates: seen and held-out normals share words but not pairings.
  const auto normal_pairs =
      draw_pairs(kTargetWords.verbs.size(), kTargetWords.nouns.size(),
                 spec.seen_templates + spec.unseen_templates, rng, "target");
  std::vector<Template> templates;
  for (const auto& [v, n] : normal_pairs) {
    templates.push_back(make_template(kTargetWords.verbs[v], kTargetWords.nouns[n], rng));
  }
  const auto fault_pairs = draw_pairs(kFaultWords.size(), kTargetWords.nouns.size(),
                                      spec.anomaly_templates, rng, "anomaly");
  for (const auto& [f, n] : fault_pairs) {
    templates.push_back(make_template(kFaultWords[f], kTargetWords.nouns[n], rng));
  }
  const std::size_t first_anomaly = spec.seen_templates + spec.unseen_templates;

  SyntheticCorpus corpus;
  corpus.seen_templates = spec.seen_templates;
  corpus.unseen_templates = spec.unseen_templates;
  std::uint64_t stamp = 1117838570;
  auto emit_target = [&](std::size_t tmpl) {
    LogRecord r;
    r.seq_index = corpus.target.size() + 1;
    r.origin = Origin::Target;
    r.label = tmpl >= first_anomaly ? Label::Anomaly : Label::Normal;
    stamp += 1 + pick(rng, 3);
    r.raw_text = render(templates[tmpl], stamp, rng);
    corpus.target.push_back(std::move(r));
    corpus.target_template.push_back(tmpl);
  };
  auto anomaly_template = [&] { return first_anomaly + pick(rng, spec.anomaly_templates); };

  const std::size_t train_total = spec.train_normal + spec.train_anomalies;
  const auto train_is_anomaly = choose_positions(train_total, spec.train_anomalies, rng);
  for (std::size_t i = 0; i < train_total; ++i) {
    emit_target(train_is_anomaly[i] ? anomaly_template() : pick(rng, spec.seen_templates));
  }
  corpus.train_window = corpus.target.size();

  const std::size_t test_anomalies = rounded(spec.test_anomaly_rate, spec.test_count);
  const auto test_is_anomaly = choose_positions(spec.test_count, test_anomalies, rng);
  const std::size_t test_normals = spec.test_count - test_anomalies;
  const auto normal_is_unseen =
      choose_positions(test_normals, rounded(spec.unseen_template_rate, test_normals), rng);
  std::size_t normal_idx = 0;
  for (std::size_t i = 0; i < spec.test_count; ++i) {
    if (test_is_anomaly[i]) {
      emit_target(anomaly_template());
    } else if (normal_is_unseen[normal_idx++]) {
      emit_target(spec.seen_templates + pick(rng, spec.unseen_templates));
    } else {
      emit_target(pick(rng, spec.seen_templates));
    }
  }

  // Auxiliary systems.
  std::vector<std::size_t> target_nouns(kTargetWords.nouns.size());
  std::iota(target_nouns.begin(), target_nouns.end(), std::size_t{0});
  std::shuffle(target_nouns.begin(), target_nouns.end(), rng);
  std::vector<Template> aux_templates;
  for (std::size_t s = 0; s < spec.auxiliary_systems; ++s) {
    WordPool words = kAuxiliaryWords[s];
    for (std::size_t i = 0; i < spec.shared_nouns; ++i)
      words.nouns.push_back(kTargetWords.nouns[target_nouns[i]]);
    const std::size_t n_fault =
        rounded(spec.auxiliary_fault_share, spec.templates_per_auxiliary_system);
    const std::size_t n_plain = spec.templates_per_auxiliary_system - n_fault;
    for (const auto& [v, n] : draw_pairs(words.verbs.size(), words.nouns.size(), n_plain, rng,
                                         "auxiliary")) {
      aux_templates.push_back(make_template(words.verbs[v], words.nouns[n], rng));
    }
    for (const auto& [f, n] :
         draw_pairs(kFaultWords.size(), words.nouns.size(), n_fault, rng, "auxiliary fault")) {
      aux_templates.push_back(make_template(kFaultWords[f], words.nouns[n], rng));
    }
  }
  std::uint64_t aux_stamp = 1131566461;
  for (std::size_t i = 0; i < spec.auxiliary_count; ++i) {
    LogRecord r;
    r.seq_index = i + 1;
    r.origin = Origin::Auxiliary;
    r.label = Label::Normal;
    aux_stamp += 1 + pick(rng, 3);
    r.raw_text = render(aux_templates[pick(rng, aux_templates.size())], aux_stamp, rng);
    corpus.auxiliary.push_back(std::move(r));
  }
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const SyntheticSpec& spec,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_log = [](const std::filesystem::path& path, const std::vector<LogRecord>& recs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : recs) {
      out << (r.label == Label::Anomaly ? "FAULT" : "-") << ' ' << r.raw_text << '\n';
    }
  };
  write_log(dir / "target.log", corpus.target);
  write_log(dir / "aux.log", corpus.auxiliary);

  nlohmann::json meta = {{"spec", nlohmann::json::parse(to_json(spec))},
                         {"target_lines", corpus.target.size()},
                         {"auxiliary_lines", corpus.auxiliary.size()},
                         {"train_window", corpus.train_window},
                         {"train_fraction", corpus.train_fraction()}};
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  out << meta.dump(2) << '\n';
}

}  // namespace logsy
