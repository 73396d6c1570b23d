#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace logsy {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kEmbeddingId = 2;
inline constexpr std::size_t kDefaultMaxLen = 50;

/// Frozen snapshot of the NLTK English stopword list (179 entries).
std::span<const std::string_view> english_stopwords();
bool is_stopword(std::string_view token);

/// Cleans a raw message into word tokens:
///   1. drop `scheme://...` URLs and whitespace-delimited tokens with >= 2 '/'
///   2. lowercase ASCII
///   3. delete every ASCII character that is neither alphanumeric nor space
///   4. split on whitespace
///   5. drop tokens containing a digit
///   6. drop stopwords
std::vector<std::string> preprocess(std::string_view raw_text);

class Vocabulary {
 public:
  /// Reserved tokens only.
  Vocabulary();

  static Vocabulary from_tokens(std::vector<std::string> tokens_by_id);

  TokenId id_of(std::string_view token) const;  // kUnkId when absent
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;

  /// Token strings ordered by id, reserved tokens first.
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;

  friend Vocabulary build_vocab(std::span<const std::vector<std::string>>,
                                std::size_t);
};

/// Assigns ids >= 3 to distinct tokens in first-occurrence order. Tokens seen
/// fewer than `min_frequency` times are left out (they encode as '[UNK]').
Vocabulary build_vocab(std::span<const std::vector<std::string>> messages,
                       std::size_t min_frequency = 1);

struct TokenSequence {
  std::vector<TokenId> ids;  // exactly max_len entries
  std::size_t real_len = 0;  // includes the '[EMBEDDING]' prefix

  std::size_t max_len() const { return ids.size(); }
  bool valid(std::size_t pos) const { return pos < real_len; }
  std::vector<bool> mask() const;
};

/// '[EMBEDDING]' followed by token ids (UNK for out-of-vocabulary), truncated
/// to max_len keeping the prefix, padded with '[PAD]'.
TokenSequence encode(std::span<const std::string> tokens,
                     const Vocabulary& vocab,
                     std::size_t max_len = kDefaultMaxLen);

/// preprocess + encode.
TokenSequence encode_message(std::string_view raw_text, const Vocabulary& vocab,
                             std::size_t max_len = kDefaultMaxLen);

}  // namespace logsy
