#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace privlabel {

using TokenId = std::int32_t;

// Word-level vocabulary. Text is lower-cased (ASCII) and split into runs of
// letters/digits/apostrophes/non-ASCII bytes; every other printable
// character is its own token. Because tokens are whole words, masking a
// token masks a whole word.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kMask = 4;
  static constexpr TokenId kFirstRegular = 5;

  Vocabulary();

  // Words seen at least `min_count` times, most frequent first (ties by
  // lexicographic order), capped at `max_size` total entries.
  static Vocabulary build(const std::vector<std::string>& texts, std::size_t min_count = 1,
                          std::size_t max_size = 50000);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  static std::vector<std::string> split_words(std::string_view text);

  std::vector<TokenId> encode(std::string_view text) const;
  TokenId id(std::string_view word) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_special(TokenId id) const { return id < kFirstRegular; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace privlabel
