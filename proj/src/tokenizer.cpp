#include "swprobe/tokenizer.hpp"

#include <algorithm>
#include <set>

#include "swprobe/error.hpp"
#include "swprobe/utf8.hpp"

namespace swprobe {

Vocabulary::Vocabulary(std::vector<std::string> entries, std::string continuation_prefix,
                       SpecialTokens specials)
    : entries_(std::move(entries)),
      prefix_(std::move(continuation_prefix)),
      specials_(std::move(specials)) {
  if (prefix_.empty()) throw Error("vocab", "continuation prefix must be non-empty");
  for (const auto& s : specials_.all()) {
    if (s.starts_with(prefix_)) {
      throw Error("vocab", "special token '" + s + "' starts with the continuation prefix");
    }
  }
  ids_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const std::string& e = entries_[i];
    if (e.empty()) throw Error("vocab", "empty entry at line " + std::to_string(i + 1));
    auto [it, inserted] = ids_.emplace(e, static_cast<std::int64_t>(i));
    if (!inserted) {
      throw Error("vocab", "duplicate subword '" + e + "' at line " + std::to_string(i + 1) +
                               " (first seen at line " + std::to_string(it->second + 1) + ")");
    }
    std::string_view body = e;
    if (body.starts_with(prefix_)) body.remove_prefix(prefix_.size());
    max_piece_chars_ = std::max(max_piece_chars_, utf8::length(body));
  }
  if (!ids_.contains(specials_.unk)) {
    throw Error("vocab", "vocabulary has no UNK entry '" + specials_.unk + "'");
  }
}

bool Vocabulary::contains(std::string_view piece) const { return id(piece) >= 0; }

std::int64_t Vocabulary::id(std::string_view piece) const {
  auto it = ids_.find(std::string(piece));
  return it == ids_.end() ? -1 : it->second;
}

Vocabulary load_vocabulary(std::istream& in, std::string continuation_prefix,
                           SpecialTokens specials) {
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    entries.push_back(line);
  }
  return Vocabulary(std::move(entries), std::move(continuation_prefix), std::move(specials));
}

Segmentation tokenize_word(const Vocabulary& vocab, std::string_view word) {
  if (word.empty()) throw Error("tokenize", "cannot tokenize an empty word");
  if (utf8::has_whitespace(word)) {
    throw Error("tokenize", "word contains whitespace: '" + std::string(word) + "'");
  }
  Segmentation seg;
  seg.word = std::string(word);
  const auto bounds = utf8::boundaries(word);
  const std::size_t chars = bounds.size() - 1;
  auto unknown = [&] {
    seg.pieces = {vocab.specials().unk};
    seg.is_unknown = true;
    return seg;
  };
  if (chars > Vocabulary::kMaxWordChars) return unknown();

  std::string candidate;
  std::size_t pos = 0;
  while (pos < chars) {
    std::size_t end = std::min(chars, pos + vocab.max_piece_chars());
    bool matched = false;
    for (; end > pos; --end) {
      candidate.clear();
      if (pos > 0) candidate = vocab.continuation_prefix();
      candidate.append(word.substr(bounds[pos], bounds[end] - bounds[pos]));
      if (vocab.contains(candidate)) {
        matched = true;
        break;
      }
    }
    if (!matched) return unknown();
    seg.pieces.push_back(candidate);
    pos = end;
  }
  return seg;
}

SentenceTokens tokenize_sentence(const Vocabulary& vocab, const std::vector<std::string>& words) {
  if (words.empty()) throw Error("tokenize", "cannot tokenize an empty sentence");
  SentenceTokens out;
  out.subwords.push_back(vocab.specials().cls);
  for (const auto& w : words) {
    Segmentation seg = tokenize_word(vocab, w);
    Span span;
    span.start = static_cast<std::uint32_t>(out.subwords.size());
    out.subwords.insert(out.subwords.end(), seg.pieces.begin(), seg.pieces.end());
    span.end = static_cast<std::uint32_t>(out.subwords.size());
    out.spans.push_back(span);
  }
  out.subwords.push_back(vocab.specials().sep);
  return out;
}

std::string join_pieces(const std::vector<std::string>& pieces, std::string_view prefix) {
  std::string out;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    std::string_view p = pieces[i];
    if (i > 0 && p.starts_with(prefix)) p.remove_prefix(prefix.size());
    out.append(p);
  }
  return out;
}

namespace {

struct WordSymbols {
  std::vector<std::string> symbols;
  std::uint64_t count;
};

std::string merge_symbols(const std::string& left, const std::string& right,
                          const std::string& prefix) {
  return left + right.substr(prefix.size());
}

}  // namespace

TrainedVocabulary train_vocabulary(const std::map<std::string, std::uint64_t>& word_counts,
                                   std::size_t target_size, std::string continuation_prefix,
                                   std::vector<std::string> reserved, SpecialTokens specials) {
  if (continuation_prefix.empty()) throw Error("vocab", "continuation prefix must be non-empty");
  if (std::find(reserved.begin(), reserved.end(), specials.unk) == reserved.end()) {
    throw Error("vocab", "reserved entries must include the UNK token '" + specials.unk + "'");
  }

  std::vector<WordSymbols> words;
  std::set<std::string> alphabet, inner;
  for (const auto& [word, count] : word_counts) {
    if (word.empty() || count == 0) continue;
    if (utf8::has_whitespace(word)) throw Error("vocab", "corpus word contains whitespace: '" + word + "'");
    const auto bounds = utf8::boundaries(word);
    WordSymbols ws{{}, count};
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      std::string ch = word.substr(bounds[k], bounds[k + 1] - bounds[k]);
      alphabet.insert(ch);
      if (k > 0) inner.insert(ch);
      ws.symbols.push_back(k == 0 ? ch : continuation_prefix + ch);
    }
    words.push_back(std::move(ws));
  }

  const std::size_t minimum = reserved.size() + alphabet.size() + inner.size();
  if (target_size < minimum) {
    throw Error("vocab", "target size " + std::to_string(target_size) + " is below the minimum of " +
                             std::to_string(minimum) + " (" + std::to_string(reserved.size()) +
                             " reserved + " + std::to_string(alphabet.size()) + " characters + " +
                             std::to_string(inner.size()) + " continuation characters)");
  }

  std::vector<std::string> entries = reserved;
  std::set<std::string> present(entries.begin(), entries.end());
  auto add = [&](const std::string& e) {
    if (present.insert(e).second) entries.push_back(e);
  };
  for (const auto& ch : alphabet) add(ch);
  for (const auto& ch : inner) add(continuation_prefix + ch);

  bool truncated = false;
  while (entries.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
        pair_counts[{w.symbols[i], w.symbols[i + 1]}] += w.count;
      }
    }
    if (pair_counts.empty()) {
      truncated = true;
      break;
    }
    // std::map iterates in key order, so the first maximum wins ties.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = merge_symbols(left, right, continuation_prefix);
    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
    add(merged);
  }

  return {Vocabulary(std::move(entries), std::move(continuation_prefix), std::move(specials)),
          truncated};
}

}  // namespace swprobe
