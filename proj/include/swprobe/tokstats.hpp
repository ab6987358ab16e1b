#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swprobe/tokenizer.hpp"

namespace swprobe {

struct SegmentedItem {
  std::string word;
  std::vector<std::string> pieces;
  bool is_unknown = false;
  std::uint64_t frequency = 1;
};

// Word types with their segmentation and running-corpus frequency.
class SegmentedCorpus {
 public:
  explicit SegmentedCorpus(std::string continuation_prefix = "##", std::string unk = "[UNK]")
      : prefix_(std::move(continuation_prefix)), unk_(std::move(unk)) {}

  // Rejects zero frequency, an empty piece list, and duplicate words.
  void add(SegmentedItem item);
  // Adds `count` occurrences of a word, merging with an existing entry.
  void add_occurrences(const Segmentation& seg, std::uint64_t count = 1);

  const std::vector<SegmentedItem>& items() const { return items_; }
  bool empty() const { return items_.empty(); }
  const std::string& continuation_prefix() const { return prefix_; }
  const std::string& unk() const { return unk_; }

 private:
  std::vector<SegmentedItem> items_;
  std::map<std::string, std::size_t> index_;
  std::string prefix_;
  std::string unk_;
};

// Gold morpheme segmentations keyed by word.
using MorphGold = std::map<std::string, std::vector<std::string>>;

enum class PiecePosition { First, Last };

struct LengthStats {
  double multi_piece_fraction = 0;
  double pieces_mean = 0, pieces_std = 0;
  double first_chars_mean = 0, first_chars_std = 0;
  double last_chars_mean = 0, last_chars_std = 0;
};

struct Agreement {
  double full = 0, first = 0, last = 0;
};

struct TokStatsReport {
  std::string name;
  std::optional<std::size_t> vocabulary_size;
  double entropy_first_bits = 0;
  double entropy_last_bits = 0;
  LengthStats lengths;
  std::optional<Agreement> agreement;
};

struct ProfileRow {
  std::uint32_t bucket;
  std::uint32_t piece_count;
  std::uint64_t tokens;
  friend bool operator==(const ProfileRow&, const ProfileRow&) = default;
};

// Shannon entropy in bits of the frequency-weighted piece distribution at
// `position`. Pieces keep their continuation prefix.
double piece_entropy(const SegmentedCorpus& corpus, PiecePosition position);

// Frequency-weighted; character lengths exclude the continuation prefix; std
// is the population standard deviation.
LengthStats length_stats(const SegmentedCorpus& corpus);

// Every corpus word must be in `gold`. UNK segmentations never agree.
Agreement morph_agreement(const SegmentedCorpus& corpus, const MorphGold& gold);

// Rows (bucket, piece count, token count) over words ranked by descending
// frequency, ties broken by byte order. Rows with zero tokens are omitted.
std::vector<ProfileRow> rank_length_profile(const SegmentedCorpus& corpus, std::uint32_t buckets);

TokStatsReport compute_report(const SegmentedCorpus& corpus, const MorphGold* gold,
                              std::string name = {},
                              std::optional<std::size_t> vocabulary_size = std::nullopt);

// `word<TAB>freq<TAB>piece1 piece2 ...`
SegmentedCorpus read_segmented_corpus(std::istream& in, std::string continuation_prefix = "##",
                                      std::string unk = "[UNK]");
// `word<TAB>morph1 morph2 ...`
MorphGold read_morph_gold(std::istream& in);

// Text table, one row per statistic and one column per report.
std::string format_report_table(const std::vector<TokStatsReport>& reports);
std::string report_to_json(const std::vector<TokStatsReport>& reports);
std::string profile_to_csv(const std::vector<ProfileRow>& rows);

}  // namespace swprobe
