#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

namespace swprobe {

struct ConlluToken {
  std::string form;
  std::string upos;
  std::map<std::string, std::string> feats;
};

struct ConlluSentence {
  std::vector<ConlluToken> tokens;
  std::size_t first_line = 0;

  std::vector<std::string> words() const;
};

// Reads syntactic words only: multiword-token ranges (1-2) and empty nodes
// (1.1) are skipped. Any other line that is not ten TAB-separated columns, or
// whose FEATS is not `_` or `Key=Value|...`, is rejected with its line number.
std::vector<ConlluSentence> read_conllu(std::istream& in);

}  // namespace swprobe
