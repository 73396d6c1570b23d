#include "logsy/tokenizer.hpp"

#include <stdexcept>

namespace logsy {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}
bool is_ascii(char c) { return static_cast<unsigned char>(c) < 0x80; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_scheme_char(char c) {
  return is_alpha(c) || is_digit(c) || c == '+' || c == '.' || c == '-';
}

// Removes every match of [A-Za-z][A-Za-z0-9+.-]*://\S*
std::string strip_urls(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t copied = 0;
  std::size_t search = 0;
  while (true) {
    const std::size_t sep = text.find("://", search);
    if (sep == std::string_view::npos) break;
    std::size_t start = sep;
    while (start > copied && is_scheme_char(text[start - 1])) --start;
    while (start < sep && !is_alpha(text[start])) ++start;
    if (start == sep) {
      search = sep + 3;
      continue;
    }
    std::size_t end = sep + 3;
    while (end < text.size() && !is_space(text[end])) ++end;
    out.append(text.substr(copied, start - copied));
    copied = end;
    search = end;
  }
  out.append(text.substr(copied));
  return out;
}

}  // namespace

std::vector<std::string> preprocess(std::string_view raw_text) {
  const std::string no_urls = strip_urls(raw_text);

  std::string cleaned;
  cleaned.reserve(no_urls.size());
  std::size_t i = 0;
  while (i < no_urls.size()) {
    if (is_space(no_urls[i])) {
      cleaned.push_back(' ');
      ++i;
      continue;
    }
    std::size_t end = i;
    std::size_t slashes = 0;
    while (end < no_urls.size() && !is_space(no_urls[end])) {
      if (no_urls[end] == '/') ++slashes;
      ++end;
    }
    if (slashes < 2) {
      for (std::size_t k = i; k < end; ++k) {
        char c = no_urls[k];
        if (!is_ascii(c)) {
          cleaned.push_back(c);
        } else if (is_alpha(c) || is_digit(c)) {
          cleaned.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        }
      }
    }
    i = end;
  }

  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    while (pos < cleaned.size() && cleaned[pos] == ' ') ++pos;
    std::size_t end = pos;
    bool has_digit = false;
    while (end < cleaned.size() && cleaned[end] != ' ') {
      has_digit = has_digit || is_digit(cleaned[end]);
      ++end;
    }
    if (end > pos && !has_digit) {
      std::string_view tok(cleaned.data() + pos, end - pos);
      if (!is_stopword(tok)) tokens.emplace_back(tok);
    }
    pos = end;
  }
  return tokens;
}

Vocabulary::Vocabulary() {
  add("[PAD]");
  add("[UNK]");
  add("[EMBEDDING]");
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens_by_id) {
  if (tokens_by_id.size() < 3 || tokens_by_id[0] != "[PAD]" ||
      tokens_by_id[1] != "[UNK]" || tokens_by_id[2] != "[EMBEDDING]") {
    throw std::invalid_argument("vocabulary must start with [PAD], [UNK], [EMBEDDING]");
  }
  Vocabulary v;
  for (std::size_t i = 3; i < tokens_by_id.size(); ++i) {
    if (v.contains(tokens_by_id[i])) {
      throw std::invalid_argument("duplicate vocabulary token: " + tokens_by_id[i]);
    }
    v.add(std::move(tokens_by_id[i]));
  }
  return v;
}

void Vocabulary::add(std::string token) {
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

TokenId Vocabulary::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> messages,
                       std::size_t min_frequency) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& msg : messages) {
    for (const auto& tok : msg) {
      auto [it, inserted] = counts.try_emplace(tok, 0);
      if (inserted) order.push_back(tok);
      ++it->second;
    }
  }
  Vocabulary vocab;
  for (auto& tok : order) {
    if (counts[tok] >= min_frequency && !vocab.contains(tok)) {
      vocab.add(std::move(tok));
    }
  }
  return vocab;
}

std::vector<bool> TokenSequence::mask() const {
  std::vector<bool> m(ids.size(), false);
  for (std::size_t i = 0; i < real_len; ++i) m[i] = true;
  return m;
}

TokenSequence encode(std::span<const std::string> tokens,
                     const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
  TokenSequence seq;
  seq.ids.assign(max_len, kPadId);
  seq.ids[0] = kEmbeddingId;
  seq.real_len = 1;
  for (const auto& tok : tokens) {
    if (seq.real_len == max_len) break;
    seq.ids[seq.real_len++] = vocab.id_of(tok);
  }
  return seq;
}

TokenSequence encode_message(std::string_view raw_text, const Vocabulary& vocab,
                             std::size_t max_len) {
  const auto tokens = preprocess(raw_text);
  return encode(tokens, vocab, max_len);
}

}  // namespace logsy
