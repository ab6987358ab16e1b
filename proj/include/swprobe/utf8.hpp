#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace swprobe::utf8 {

// Byte offsets of every code point start in `s`, followed by s.size().
// Invalid sequences are treated one byte at a time.
std::vector<std::size_t> boundaries(std::string_view s);

// Number of code points.
std::size_t length(std::string_view s);

// Lowercases ASCII, Latin-1 and Latin Extended-A letters; everything else
// passes through unchanged.
std::string to_lower(std::string_view s);

bool has_whitespace(std::string_view s);

// Splits on ASCII whitespace, dropping empty fields.
std::vector<std::string> split_ws(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace swprobe::utf8
