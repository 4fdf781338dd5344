#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace privlabel::text {

// Splits on Unicode whitespace (ASCII whitespace plus U+0085, U+00A0,
// U+1680, U+2000..U+200A, U+2028, U+2029, U+202F, U+205F, U+3000).
// Punctuation stays attached to its word.
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

// Trim and collapse internal whitespace runs to a single ASCII space.
std::string normalize_space(std::string_view s);

std::string to_lower_ascii(std::string_view s);

// FNV-1a, 64-bit. Stable across platforms; used for ids and content keys.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Hash of several fields joined with an unambiguous separator.
std::string stable_id(std::initializer_list<std::string_view> fields);

}  // namespace privlabel::text
