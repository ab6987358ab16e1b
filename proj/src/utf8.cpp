#include "swprobe/utf8.hpp"

#include <cstdint>

namespace swprobe::utf8 {
namespace {

std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::uint32_t lower_code_point(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  // Latin Extended-A: upper/lower pairs alternate, with the parity flipping at U+0139.
  if ((cp >= 0x100 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177)) {
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) {
    return (cp % 2 == 1) ? cp + 1 : cp;
  }
  if (cp == 0x178) return 0xFF;
  return cp;
}

void append_code_point(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::vector<std::size_t> boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  out.reserve(s.size() + 1);
  std::size_t i = 0;
  while (i < s.size()) {
    out.push_back(i);
    std::size_t len = sequence_length(static_cast<unsigned char>(s[i]));
    bool valid = i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      valid = (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    }
    i += valid ? len : 1;
  }
  out.push_back(s.size());
  return out;
}

std::size_t length(std::string_view s) { return boundaries(s).size() - 1; }

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  const auto bounds = boundaries(s);
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    std::string_view unit = s.substr(bounds[k], bounds[k + 1] - bounds[k]);
    const auto b0 = static_cast<unsigned char>(unit[0]);
    if (unit.size() == 1) {
      out.push_back(static_cast<char>(lower_code_point(b0)));
    } else if (unit.size() == 2 && (b0 & 0xE0) == 0xC0) {
      std::uint32_t cp = ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(unit[1]) & 0x3Fu);
      append_code_point(out, lower_code_point(cp));
    } else {
      out.append(unit);
    }
  }
  return out;
}

bool has_whitespace(std::string_view s) {
  for (char c : s) {
    if (is_ascii_space(c)) return true;
  }
  return false;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_ascii_space(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && !is_ascii_space(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace swprobe::utf8
