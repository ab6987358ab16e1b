#include "swprobe/sequence_eval.hpp"

#include "swprobe/error.hpp"
#include "swprobe/utf8.hpp"

namespace swprobe {
namespace {

void check_aligned(const std::vector<TagSequence>& predicted, const std::vector<TagSequence>& gold) {
  if (predicted.size() != gold.size()) {
    throw Error("eval", "predicted and gold sentence counts differ (" + std::to_string(predicted.size()) +
                            " vs " + std::to_string(gold.size()) + ")");
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i].sentence_id != gold[i].sentence_id) {
      throw Error("eval", "sentence ids differ at position " + std::to_string(i));
    }
    if (predicted[i].tags.size() != gold[i].tags.size()) {
      throw Error("eval", "sentence " + std::to_string(gold[i].sentence_id) + " has " +
                              std::to_string(predicted[i].tags.size()) + " predicted tags for " +
                              std::to_string(gold[i].tags.size()) + " words");
    }
  }
}

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

}  // namespace

double pos_accuracy(const std::vector<TagSequence>& predicted, const std::vector<TagSequence>& gold) {
  check_aligned(predicted, gold);
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t w = 0; w < gold[i].tags.size(); ++w) {
      ++total;
      hit += predicted[i].tags[w] == gold[i].tags[w];
    }
  }
  return safe_div(static_cast<double>(hit), static_cast<double>(total));
}

void check_bio_tag(const std::string& tag) {
  if (tag == "O") return;
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return;
  throw Error("eval", "unknown tag syntax '" + tag + "' (expected O, B-TYPE or I-TYPE)");
}

std::vector<EntitySpan> bio_spans(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  std::size_t i = 0;
  while (i < tags.size()) {
    check_bio_tag(tags[i]);
    if (tags[i] == "O") {
      ++i;
      continue;
    }
    EntitySpan span{tags[i].substr(2), i, i + 1};
    const std::string inside = "I-" + span.type;
    while (span.end < tags.size() && tags[span.end] == inside) ++span.end;
    spans.push_back(std::move(span));
    i = spans.back().end;
  }
  return spans;
}

std::vector<std::string> repair_bio2(std::vector<std::string> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    check_bio_tag(tags[i]);
    if (tags[i][0] != 'I') continue;
    const std::string type = tags[i].substr(2);
    const bool continues = i > 0 && tags[i - 1] != "O" && tags[i - 1].substr(2) == type;
    if (!continues) tags[i] = "B-" + type;
  }
  return tags;
}

SpanF1Report ner_span_f1(const std::vector<TagSequence>& predicted, const std::vector<TagSequence>& gold) {
  check_aligned(predicted, gold);
  SpanF1Report r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = bio_spans(gold[i].tags);
    const auto p = bio_spans(predicted[i].tags);
    for (const auto& s : g) ++r.per_type[s.type].gold;
    for (const auto& s : p) ++r.per_type[s.type].predicted;
    // Both lists are sorted by start and non-overlapping.
    std::size_t a = 0, b = 0;
    while (a < g.size() && b < p.size()) {
      if (g[a].start < p[b].start) {
        ++a;
      } else if (p[b].start < g[a].start) {
        ++b;
      } else {
        if (g[a] == p[b]) ++r.per_type[g[a].type].correct;
        ++a;
        ++b;
      }
    }
    r.gold += g.size();
    r.predicted += p.size();
  }
  for (const auto& [type, c] : r.per_type) r.correct += c.correct;
  r.precision = safe_div(static_cast<double>(r.correct), static_cast<double>(r.predicted));
  r.recall = safe_div(static_cast<double>(r.correct), static_cast<double>(r.gold));
  r.f1 = safe_div(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

std::vector<TaggedSentence> read_ner_tsv(std::istream& in) {
  std::vector<TaggedSentence> out;
  TaggedSentence cur;
  std::string line;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (!cur.words.empty()) {
      cur.tags = repair_bio2(std::move(cur.tags));
      out.push_back(std::move(cur));
    }
    cur = TaggedSentence{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    auto cols = utf8::split(line, '\t');
    if (cols.size() != 2 || cols[0].empty()) {
      throw Error("eval", "NER line " + std::to_string(line_no) + ": expected token<TAB>tag");
    }
    try {
      check_bio_tag(cols[1]);
    } catch (const Error& e) {
      throw Error("eval", "NER line " + std::to_string(line_no) + ": " + e.what());
    }
    cur.words.push_back(cols[0]);
    cur.tags.push_back(cols[1]);
  }
  flush();
  return out;
}

std::vector<TaggedSentence> pos_sentences(const std::vector<ConlluSentence>& corpus) {
  std::vector<TaggedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    TaggedSentence t;
    for (const auto& tok : s.tokens) {
      t.words.push_back(tok.form);
      t.tags.push_back(tok.upos);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace swprobe
