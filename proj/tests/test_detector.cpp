#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>

#include <json.hpp>

#include "logsy/detector.hpp"
#include "logsy/objective.hpp"
#include "logsy/trainer.hpp"
#include "oracles.hpp"

using namespace logsy;

namespace {

ModelBundle random_bundle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> msgs;
  for (int i = 0; i < 40; ++i) msgs.push_back(preprocess(oracle::random_message(rng)));
  ModelBundle b;
  b.vocab = build_vocab(msgs);
  b.params = init_params(ModelConfig{}, b.vocab.size(), seed);
  b.metadata.seed = seed;
  b.metadata.train_fraction = 0.2;
  b.metadata.auxiliary_count = 1000;
  b.metadata.dataset_digest = "0badc0de";
  b.metadata.extra["note"] = "unit";
  return b;
}

std::vector<ScoredLabel> scored(std::vector<double> s, std::vector<int> y) {
  std::vector<ScoredLabel> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s[i], y[i] == 1});
  return out;
}

// Rewrites the JSON header of a serialized bundle.
std::string with_header(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  auto header = nlohmann::json::parse(bytes.substr(16, len));
  edit(header);
  const std::string h = header.dump();
  std::string out = bytes.substr(0, 8);
  std::uint64_t n = h.size();
  for (int i = 0; i < 8; ++i, n >>= 8) out.push_back(static_cast<char>(n & 0xFF));
  return out + h + bytes.substr(16 + len);
}

}  // namespace

TEST_CASE("verdicts use a strict inequality") {
  ModelBundle b = random_bundle(1);
  const std::string msg = "kernel panic on node";
  const double s = anomaly_score(embed_message(msg, b));
  REQUIRE(s > 0.0);
  CHECK_FALSE(score_message(msg, b, s).is_anomaly);
  CHECK(score_message(msg, b, std::nextafter(s, 0.0)).is_anomaly);
  CHECK(score_message(msg, b, 0.0).is_anomaly);
  const auto v = score_message(msg, b, 0.25);
  CHECK(v.threshold_used == 0.25);
  CHECK(v.score == s);

  CHECK_THROWS_AS(score_message(msg, b), std::invalid_argument);
  b.threshold = 1e9;
  CHECK_FALSE(score_message(msg, b).is_anomaly);
  CHECK(score_message(msg, b, 0.0).is_anomaly);  // explicit overrides stored
}

TEST_CASE("empty messages are scored like any other") {
  const ModelBundle b = random_bundle(2);
  const auto v = score_message("12:00:01 #77", b, 0.0);
  CHECK(v.score == anomaly_score(embed_message("", b)));
}

TEST_CASE("scoring is pure and verdicts are monotone in the threshold") {
  const ModelBundle b = random_bundle(3);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const std::string msg = oracle::random_message(rng);
    const auto a = score_message(msg, b, 0.3);
    const auto c = score_message(msg, b, 0.3);
    CHECK(a.score == c.score);
    CHECK(a.is_anomaly == c.is_anomaly);
    bool prev = true;
    for (double t = 0.0; t < 5.0; t += 0.05) {
      const bool flagged = score_message(msg, b, t).is_anomaly;
      CHECK((prev || !flagged));
      prev = flagged;
    }
  }
}

TEST_CASE("sweep examples") {
  const auto r = sweep_threshold(scored({0.1, 0.2, 0.9}, {0, 0, 1}));
  CHECK(r.best.f1 == 1.0);
  CHECK(r.best_threshold == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(r.best.threshold == r.best_threshold);
  CHECK(r.curve.size() == 4);

  const auto inverted = sweep_threshold(scored({0.1, 0.2, 0.9}, {1, 1, 0}));
  CHECK(inverted.best.f1 < 1.0);
  // Flag everything: precision 2/3, recall 1.
  CHECK(inverted.best.f1 == doctest::Approx(0.8));

  const auto perfect = sweep_threshold(scored({5, 6, 7, 1, 2, 3}, {1, 1, 1, 0, 0, 0}));
  CHECK(perfect.best.f1 == 1.0);
  CHECK(perfect.best_threshold == 4.0);

  CHECK_THROWS_AS(sweep_threshold(scored({1, 2}, {0, 0})), std::invalid_argument);
  CHECK_THROWS_AS(sweep_threshold(scored({1, 2}, {1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(sweep_threshold({}), std::invalid_argument);
}

TEST_CASE("sweep ties go to the lowest threshold and curves ascend") {
  // Flagging everything and flagging only the top score both give F1 = 2/3.
  const auto r = sweep_threshold(scored({1, 2, 3, 4}, {1, 0, 0, 1}));
  for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i - 1].threshold < r.curve[i].threshold);
  CHECK(r.curve[0].f1 == r.curve[3].f1);
  CHECK(r.best.f1 == r.curve[0].f1);
  CHECK(r.best_threshold == r.curve[0].threshold);
  CHECK(r.best_threshold == 0.0);

  const auto dup = sweep_threshold(scored({1, 1, 1, 2}, {0, 1, 0, 1}));
  CHECK(dup.curve.size() == 3);
  CHECK(dup.curve.back().tp + dup.curve.back().fp == 0);
  CHECK(dup.curve.front().tp + dup.curve.front().fp == 4);
}

TEST_CASE("sweep agrees with brute-force enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> val(0, 12), lab(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredLabel> s;
    for (int i = 0; i < 15; ++i) s.push_back({val(rng) * 0.5, lab(rng) == 0});
    s.push_back({val(rng) * 0.5, true});
    s.push_back({val(rng) * 0.5, false});
    const auto r = sweep_threshold(s);
    double best = 0.0;
    for (double t = -1.0; t <= 7.0; t += 0.25) {
      std::vector<Outcome> o;
      for (const auto& x : s) o.push_back({x.score > t, x.anomaly});
      best = std::max(best, compute_metrics(o).f1);
    }
    CHECK(r.best.f1 == doctest::Approx(best).epsilon(1e-15));
    std::vector<Outcome> at;
    for (const auto& x : s) at.push_back({x.score > r.best_threshold, x.anomaly});
    CHECK(compute_metrics(at).f1 == r.best.f1);
  }
}

TEST_CASE("bundle round trip is identity on 100 random messages") {
  ModelBundle b = random_bundle(4);
  b.threshold = 0.75;
  b.metadata.threshold_source = "validation-sweep";
  const auto dir = oracle::temp_dir("bundle");
  save_bundle(b, dir / "m.bundle");
  CHECK_FALSE(std::filesystem::exists(dir / "m.bundle.tmp"));
  const ModelBundle r = load_bundle(dir / "m.bundle");

  CHECK(r.vocab == b.vocab);
  CHECK(r.config() == b.config());
  CHECK(r.threshold == b.threshold);
  CHECK(r.metadata == b.metadata);
  CHECK(params_checksum(r.params) == params_checksum(b.params));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const std::string msg = oracle::random_message(rng);
    CHECK(embed_message(msg, r) == embed_message(msg, b));
  }
  CHECK(serialize_bundle(r) == serialize_bundle(b));
}

TEST_CASE("bundle without a threshold") {
  const ModelBundle b = random_bundle(5);
  const ModelBundle r = deserialize_bundle(serialize_bundle(b));
  CHECK_FALSE(r.threshold.has_value());
}

TEST_CASE("corrupted bundles are refused") {
  const ModelBundle b = random_bundle(6);
  const std::string bytes = serialize_bundle(b);

  auto expect_error = [](const std::string& data, const std::string& needle) {
    try {
      deserialize_bundle(data);
      FAIL("expected BundleError");
    } catch (const BundleError& e) {
      CAPTURE(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error(bytes.substr(0, bytes.size() - 5), "checksum");
  expect_error(bytes.substr(0, 20), "");
  expect_error(bytes.substr(0, 3), "");
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x10;
  expect_error(flipped, "checksum");
  std::string magic = bytes;
  magic[0] = 'X';
  expect_error(magic, "");

  expect_error(with_header(bytes, [](auto& h) { h["format_version"] = 7; }), "format_version 7");
  expect_error(with_header(bytes, [](auto& h) { h["format_version"] = 7; }), "format_version 1");
  expect_error(with_header(bytes, [](auto& h) { h["tensors"][0]["rows"] = 3; }), "");
  expect_error(with_header(bytes, [](auto& h) { h["vocabulary"][0] = "oops"; }), "");
  CHECK_NOTHROW(deserialize_bundle(with_header(bytes, [](auto&) {})));

  const auto dir = oracle::temp_dir("bundle_bad");
  std::ofstream(dir / "t.bundle", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_bundle(dir / "t.bundle"), BundleError);
  CHECK_THROWS_AS(load_bundle(dir / "missing.bundle"), BundleError);
}
