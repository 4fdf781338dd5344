#include "privlabel/tokenizer.hpp"

#include <algorithm>
#include <map>

#include "privlabel/error.hpp"

namespace privlabel {

namespace {

const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '\'' || c >= 0x80;
}

}  // namespace

Vocabulary::Vocabulary() {
  // Specials always occupy the first ids.
  for (const auto& s : kSpecials) {
    index_.emplace(s, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(s);
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    if (v.index_.count(t)) continue;
    v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

std::vector<std::string> Vocabulary::split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
      continue;
    }
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
    if (c > ' ' && c < 0x7f) out.emplace_back(1, static_cast<char>(c));
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t min_count,
                             std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [w, n] : ranked) {
    if (n < min_count) continue;
    if (tokens.size() + kSpecials.size() >= max_size) break;
    tokens.push_back(w);
  }
  return from_tokens(std::move(tokens));
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

}  // namespace privlabel
