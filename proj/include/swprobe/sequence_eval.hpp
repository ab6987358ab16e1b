#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "swprobe/conllu.hpp"

namespace swprobe {

struct TagSequence {
  std::uint64_t sentence_id = 0;
  std::vector<std::string> tags;
};

struct TaggedSentence {
  std::vector<std::string> words;
  std::vector<std::string> tags;
};

struct EntitySpan {
  std::string type;
  std::size_t start = 0, end = 0;  // half-open word interval
  auto operator<=>(const EntitySpan&) const = default;
};

struct TypeCounts {
  std::size_t gold = 0, predicted = 0, correct = 0;
};

struct SpanF1Report {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t gold = 0, predicted = 0, correct = 0;
  std::map<std::string, TypeCounts> per_type;
};

// Micro accuracy over all word positions.
double pos_accuracy(const std::vector<TagSequence>& predicted, const std::vector<TagSequence>& gold);

// Throws unless the tag is "O", "B-X" or "I-X" with a non-empty type.
void check_bio_tag(const std::string& tag);

// Maximal typed spans: a span opens at B-X, or at I-X not continuing a span
// of type X, and extends over following I-X tags.
std::vector<EntitySpan> bio_spans(const std::vector<std::string>& tags);

// Rewrites I-X that follows O or another type as B-X.
std::vector<std::string> repair_bio2(std::vector<std::string> tags);

// Exact-match micro P/R/F1 over typed spans; 0/0 is taken as 0.
SpanF1Report ner_span_f1(const std::vector<TagSequence>& predicted, const std::vector<TagSequence>& gold);

// Two-column `token<TAB>tag`, sentences separated by blank lines. Tags are
// validated and repaired to BIO2.
std::vector<TaggedSentence> read_ner_tsv(std::istream& in);

// FORM and UPOS columns.
std::vector<TaggedSentence> pos_sentences(const std::vector<ConlluSentence>& corpus);

}  // namespace swprobe
