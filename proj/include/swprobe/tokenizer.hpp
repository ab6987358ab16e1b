#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace swprobe {

struct SpecialTokens {
  std::string unk = "[UNK]";
  std::string cls = "[CLS]";
  std::string sep = "[SEP]";
  std::string pad = "[PAD]";

  std::vector<std::string> all() const { return {unk, cls, sep, pad}; }
};

// Immutable subword inventory. Ids are dense and follow insertion order.
class Vocabulary {
 public:
  static constexpr std::size_t kMaxWordChars = 256;

  // Throws Error("vocab") on duplicate entries, an empty prefix, a special
  // token that starts with the prefix, or a missing UNK entry.
  Vocabulary(std::vector<std::string> entries, std::string continuation_prefix = "##",
             SpecialTokens specials = {});

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entries() const { return entries_; }
  const std::string& continuation_prefix() const { return prefix_; }
  const SpecialTokens& specials() const { return specials_; }

  bool contains(std::string_view piece) const;
  // -1 when absent.
  std::int64_t id(std::string_view piece) const;
  // Longest entry in code points, continuation prefix excluded.
  std::size_t max_piece_chars() const { return max_piece_chars_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::int64_t> ids_;
  std::string prefix_;
  SpecialTokens specials_;
  std::size_t max_piece_chars_ = 0;
};

struct Segmentation {
  std::string word;
  std::vector<std::string> pieces;
  bool is_unknown = false;
};

// Half-open interval of subword positions.
struct Span {
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct SentenceTokens {
  std::vector<std::string> subwords;  // includes CLS and SEP
  std::vector<Span> spans;            // one per word
};

// One subword per line, line index = id. Lines may end in LF or CRLF.
Vocabulary load_vocabulary(std::istream& in, std::string continuation_prefix = "##",
                           SpecialTokens specials = {});

// Greedy left-to-right longest match. A word with no match at some position,
// or longer than Vocabulary::kMaxWordChars, becomes a single UNK piece.
Segmentation tokenize_word(const Vocabulary& vocab, std::string_view word);

SentenceTokens tokenize_sentence(const Vocabulary& vocab, const std::vector<std::string>& words);

// Strips the continuation prefix from non-initial pieces and concatenates.
std::string join_pieces(const std::vector<std::string>& pieces, std::string_view prefix);

struct TrainedVocabulary {
  Vocabulary vocab;
  // Set when the merge loop ran out of candidate pairs before target_size.
  bool truncated = false;
};

// Frequency-driven pair merging emitting WordPiece surface forms. Every observed
// character enters in its initial form, and in its continuation form when it
// occurs word-internally; merges are
// taken in order of weighted pair count, ties broken by the byte order of
// (left, right). `reserved` lists the special entries placed first; it must
// contain specials.unk.
TrainedVocabulary train_vocabulary(const std::map<std::string, std::uint64_t>& word_counts,
                                   std::size_t target_size, std::string continuation_prefix = "##",
                                   std::vector<std::string> reserved = {"[PAD]", "[UNK]", "[CLS]",
                                                                        "[SEP]"},
                                   SpecialTokens specials = {});

}  // namespace swprobe
