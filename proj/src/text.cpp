#include "privlabel/text.hpp"

#include <cstdio>

#include "privlabel/error.hpp"

namespace privlabel {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kValidation: return "validation_error";
    case ErrorKind::kDuplicate: return "duplicate";
    case ErrorKind::kDanglingReference: return "dangling_reference";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kNumeric: return "numeric_error";
    case ErrorKind::kTransport: return "transport_error";
    case ErrorKind::kUnavailable: return "unavailable";
    case ErrorKind::kIo: return "io_error";
  }
  return "error";
}

}  // namespace privlabel

namespace privlabel::text {

namespace {

// Length in bytes of a whitespace code point starting at s[i], or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  const auto at = [&](std::size_t k) {
    return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u;
  };
  if (c == 0xc2 && (at(1) == 0x85 || at(1) == 0xa0)) return 2;
  if (c == 0xe1 && at(1) == 0x9a && at(2) == 0x80) return 3;
  if (c == 0xe2 && at(1) == 0x80) {
    const auto c2 = at(2);
    if ((c2 >= 0x80 && c2 <= 0x8a) || c2 == 0xa8 || c2 == 0xa9 || c2 == 0xaf) return 3;
  }
  if (c == 0xe2 && at(1) == 0x81 && at(2) == 0x9f) return 3;
  if (c == 0xe3 && at(1) == 0x80 && at(2) == 0x80) return 3;
  return 0;
}

}  // namespace

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < s.size()) {
    const std::size_t w = whitespace_len(s, i);
    if (w > 0) {
      if (start != std::string_view::npos) {
        out.push_back(s.substr(start, i - start));
        start = std::string_view::npos;
      }
      i += w;
    } else {
      if (start == std::string_view::npos) start = i;
      ++i;
    }
  }
  if (start != std::string_view::npos) out.push_back(s.substr(start));
  return out;
}

std::size_t word_count(std::string_view s) { return split_whitespace(s).size(); }

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  while (b < s.size()) {
    const std::size_t w = whitespace_len(s, b);
    if (w == 0) break;
    b += w;
  }
  std::size_t e = s.size();
  // Walk back over ASCII whitespace and the multi-byte forms above.
  while (e > b) {
    bool stripped = false;
    for (std::size_t k = 1; k <= 3 && k <= e - b; ++k) {
      if (whitespace_len(s, e - k) == k) {
        e -= k;
        stripped = true;
        break;
      }
    }
    if (!stripped) break;
  }
  return s.substr(b, e - b);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::string normalize_space(std::string_view s) {
  std::string out;
  for (auto w : split_whitespace(s)) {
    if (!out.empty()) out.push_back(' ');
    out.append(w);
  }
  return out;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = kDigits[v & 0xf];
  return out;
}

std::string stable_id(std::initializer_list<std::string_view> fields) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto f : fields) {
    h = fnv1a64(f, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  }
  return hex64(h);
}

}  // namespace privlabel::text
