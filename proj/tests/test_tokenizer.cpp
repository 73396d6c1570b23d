#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "logsy/tokenizer.hpp"
#include "oracles.hpp"

using namespace logsy;
using Tokens = std::vector<std::string>;

TEST_CASE("preprocess examples") {
  CHECK(preprocess("Took 10 seconds to create a VM") == Tokens{"took", "seconds", "create", "vm"});
  CHECK(preprocess("error in /p/gb2/stella/RAPTOR/ handler") == Tokens{"error", "handler"});
  // "error" carries no digit and is not a stopword, so it survives.
  CHECK(preprocess("12:30:01 ERROR #4452") == Tokens{"error"});
  CHECK(preprocess("12:30:01 #4452 the").empty());
  CHECK(preprocess("").empty());
}

TEST_CASE("stopword snapshot") {
  const auto words = english_stopwords();
  CHECK(words.size() == 179);
  CHECK(std::set<std::string_view>(words.begin(), words.end()).size() == 179);
  CHECK(is_stopword("the"));
  CHECK(is_stopword("wouldn't"));
  CHECK_FALSE(is_stopword("error"));
  CHECK_FALSE(is_stopword("The"));
}

TEST_CASE("tokenizer golden file") {
  std::ifstream in(std::string(LOGSY_TEST_DATA_DIR) + "/tokenizer_golden.jsonl");
  REQUIRE(in);
  Vocabulary vocab;
  std::size_t cases = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto c = nlohmann::json::parse(line);
    const std::string input = c["input"];
    CAPTURE(c["name"].get<std::string>());
    const Tokens tokens = preprocess(input);
    CHECK(tokens == c["tokens"].get<Tokens>());
    const TokenSequence seq = encode(tokens, vocab);
    CHECK(seq.real_len == c["real_len"].get<std::size_t>());
    ++cases;
  }
  CHECK(cases == 30);
}

TEST_CASE("preprocess is idempotent on random messages") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; ++i) {
    const std::string msg = oracle::random_message(rng);
    const Tokens once = preprocess(msg);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    CAPTURE(msg);
    CHECK(preprocess(joined) == once);
  }
}

TEST_CASE("build_vocab") {
  const std::vector<Tokens> corpus{{"a", "b"}, {"b", "c"}};
  const Vocabulary v = build_vocab(corpus);
  CHECK(v.tokens() == Tokens{"[PAD]", "[UNK]", "[EMBEDDING]", "a", "b", "c"});
  CHECK(v.id_of("a") == 3);
  CHECK(v.id_of("c") == 5);
  CHECK(v.id_of("zzz") == kUnkId);
  CHECK(build_vocab(corpus) == v);

  const Vocabulary empty = build_vocab(std::vector<Tokens>{});
  CHECK(empty.size() == 3);
  CHECK(empty.id_of("[EMBEDDING]") == kEmbeddingId);

  const Vocabulary frequent = build_vocab(corpus, 2);
  CHECK(frequent.tokens() == Tokens{"[PAD]", "[UNK]", "[EMBEDDING]", "b"});
}

TEST_CASE("Vocabulary::from_tokens validates reserved ids and duplicates") {
  CHECK(Vocabulary::from_tokens({"[PAD]", "[UNK]", "[EMBEDDING]", "x"}).id_of("x") == 3);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"[UNK]", "[PAD]", "[EMBEDDING]"}), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"[PAD]", "[UNK]", "[EMBEDDING]", "x", "x"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"[PAD]", "[UNK]", "[EMBEDDING]", "[PAD]"}),
                  std::invalid_argument);
}

TEST_CASE("encode") {
  const Vocabulary v = build_vocab(std::vector<Tokens>{{"took", "vm"}});
  const Tokens toks{"took", "vm"};
  const TokenSequence seq = encode(toks, v);
  CHECK(seq.max_len() == 50);
  CHECK(seq.real_len == 3);
  CHECK(seq.ids[0] == kEmbeddingId);
  CHECK(seq.ids[1] == v.id_of("took"));
  CHECK(seq.ids[2] == v.id_of("vm"));
  for (std::size_t i = 3; i < 50; ++i) CHECK(seq.ids[i] == kPadId);
  const auto mask = seq.mask();
  for (std::size_t i = 0; i < 50; ++i) CHECK(mask[i] == (i < 3));

  const Tokens oov{"frobnicate"};
  CHECK(encode(oov, v).ids[1] == kUnkId);

  Tokens many;
  for (int i = 0; i < 60; ++i) many.push_back(i < 49 ? "took" : "vm");
  const TokenSequence cut = encode(many, v);
  CHECK(cut.real_len == 50);
  CHECK(cut.ids[0] == kEmbeddingId);
  CHECK(cut.ids[49] == v.id_of("took"));

  CHECK(encode(Tokens{}, v, 1).real_len == 1);
  CHECK(encode(toks, v, 1).ids == std::vector<TokenId>{kEmbeddingId});
  CHECK_THROWS_AS(encode(toks, v, 0), std::invalid_argument);
}

TEST_CASE("encode never emits ids outside the vocabulary") {
  std::mt19937_64 rng(3);
  std::vector<Tokens> train;
  for (int i = 0; i < 50; ++i) train.push_back(preprocess(oracle::random_message(rng)));
  const Vocabulary v = build_vocab(train);
  for (int i = 0; i < 500; ++i) {
    const TokenSequence s = encode_message(oracle::random_message(rng), v, 8);
    CHECK(s.ids.size() == 8);
    CHECK(s.ids[0] == kEmbeddingId);
    for (auto id : s.ids) CHECK(static_cast<std::size_t>(id) < v.size());
    CHECK(encode_message(oracle::random_message(rng), v, 8).ids.size() == 8);
  }
}
