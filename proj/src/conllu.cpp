#include "swprobe/conllu.hpp"

#include <cctype>

#include "swprobe/error.hpp"
#include "swprobe/utf8.hpp"

namespace swprobe {
namespace {

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  throw Error("conllu", "line " + std::to_string(line_no) + ": " + what);
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> ConlluSentence::words() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.form);
  return out;
}

std::vector<ConlluSentence> read_conllu(std::istream& in) {
  std::vector<ConlluSentence> sentences;
  ConlluSentence current;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) sentences.push_back(std::move(current));
    current = ConlluSentence{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    auto cols = utf8::split(line, '\t');
    if (cols.size() != 10) {
      malformed(line_no, "expected 10 columns, got " + std::to_string(cols.size()));
    }
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    if (!all_digits(id)) malformed(line_no, "bad token id '" + id + "'");
    if (cols[1].empty()) malformed(line_no, "empty FORM");
    ConlluToken tok{cols[1], cols[3], {}};
    if (cols[5] != "_") {
      for (const auto& kv : utf8::split(cols[5], '|')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == kv.size()) {
          malformed(line_no, "bad FEATS entry '" + kv + "'");
        }
        tok.feats[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    }
    if (current.tokens.empty()) current.first_line = line_no;
    current.tokens.push_back(std::move(tok));
  }
  flush();
  return sentences;
}

}  // namespace swprobe
