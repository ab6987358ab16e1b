#include "swprobe/tokstats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "swprobe/error.hpp"
#include "swprobe/utf8.hpp"

namespace swprobe {
namespace {

using u128 = unsigned __int128;

// Ratio of two exact integers, reduced first so that scaling every frequency
// by a constant yields the identical double.
double exact_ratio(u128 num, u128 den) {
  if (num == 0) return 0.0;
  u128 a = num, b = den;
  while (b != 0) {
    u128 t = a % b;
    a = b;
    b = t;
  }
  return static_cast<double>(num / a) / static_cast<double>(den / a);
}

// Frequency-weighted moments of an integer-valued quantity, kept exact.
struct Moments {
  u128 n = 0, sum = 0, sum_sq = 0;

  void add(std::uint64_t value, std::uint64_t weight) {
    n += weight;
    sum += u128(value) * weight;
    sum_sq += u128(value) * value * weight;
  }
  double mean() const { return exact_ratio(sum, n); }
  double stddev() const {
    // Var = (n * sum_sq - sum^2) / n^2, non-negative by Cauchy-Schwarz.
    const u128 num = n * sum_sq - sum * sum;
    return std::sqrt(exact_ratio(num, n * n));
  }
};

std::string_view strip_prefix(std::string_view piece, std::string_view prefix, bool initial) {
  if (!initial && piece.starts_with(prefix)) piece.remove_prefix(prefix.size());
  return piece;
}

void require_non_empty(const SegmentedCorpus& corpus) {
  if (corpus.empty()) throw Error("tokstats", "segmented corpus is empty");
}

}  // namespace

void SegmentedCorpus::add(SegmentedItem item) {
  if (item.frequency == 0) throw Error("tokstats", "word '" + item.word + "' has zero frequency");
  if (item.pieces.empty()) throw Error("tokstats", "word '" + item.word + "' has no pieces");
  if (index_.contains(item.word)) throw Error("tokstats", "duplicate word '" + item.word + "'");
  if (item.pieces.size() == 1 && item.pieces[0] == unk_) item.is_unknown = true;
  index_.emplace(item.word, items_.size());
  items_.push_back(std::move(item));
}

void SegmentedCorpus::add_occurrences(const Segmentation& seg, std::uint64_t count) {
  if (count == 0) return;
  auto it = index_.find(seg.word);
  if (it != index_.end()) {
    items_[it->second].frequency += count;
    return;
  }
  add({seg.word, seg.pieces, seg.is_unknown, count});
}

double piece_entropy(const SegmentedCorpus& corpus, PiecePosition position) {
  require_non_empty(corpus);
  std::map<std::string_view, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& item : corpus.items()) {
    const std::string& piece =
        position == PiecePosition::First ? item.pieces.front() : item.pieces.back();
    counts[piece] += item.frequency;
    total += item.frequency;
  }
  double h = 0.0;
  for (const auto& [piece, c] : counts) {
    const double p = exact_ratio(c, total);
    h -= p * std::log2(p);
  }
  // A single symbol gives -1 * log2(1) = -0.0.
  return h == 0.0 ? 0.0 : h;
}

LengthStats length_stats(const SegmentedCorpus& corpus) {
  require_non_empty(corpus);
  const std::string& prefix = corpus.continuation_prefix();
  Moments pieces, first, last;
  u128 multi = 0;
  for (const auto& item : corpus.items()) {
    const std::uint64_t f = item.frequency;
    const std::size_t n = item.pieces.size();
    pieces.add(n, f);
    if (n > 1) multi += f;
    first.add(utf8::length(item.pieces.front()), f);
    last.add(utf8::length(strip_prefix(item.pieces.back(), prefix, n == 1)), f);
  }
  LengthStats out;
  out.multi_piece_fraction = exact_ratio(multi, pieces.n);
  out.pieces_mean = pieces.mean();
  out.pieces_std = pieces.stddev();
  out.first_chars_mean = first.mean();
  out.first_chars_std = first.stddev();
  out.last_chars_mean = last.mean();
  out.last_chars_std = last.stddev();
  return out;
}

Agreement morph_agreement(const SegmentedCorpus& corpus, const MorphGold& gold) {
  require_non_empty(corpus);
  const std::string& prefix = corpus.continuation_prefix();
  u128 total = 0, full = 0, first = 0, last = 0;
  for (const auto& item : corpus.items()) {
    auto it = gold.find(item.word);
    if (it == gold.end()) {
      throw Error("tokstats", "word '" + item.word + "' has no gold morphological segmentation");
    }
    const auto& morphs = it->second;
    total += item.frequency;
    if (item.is_unknown || morphs.empty()) continue;
    const auto& pieces = item.pieces;
    bool same = pieces.size() == morphs.size();
    for (std::size_t i = 0; same && i < pieces.size(); ++i) {
      same = strip_prefix(pieces[i], prefix, i == 0) == morphs[i];
    }
    if (same) full += item.frequency;
    if (pieces.front() == morphs.front()) first += item.frequency;
    if (strip_prefix(pieces.back(), prefix, pieces.size() == 1) == morphs.back()) {
      last += item.frequency;
    }
  }
  return {exact_ratio(full, total), exact_ratio(first, total), exact_ratio(last, total)};
}

std::vector<ProfileRow> rank_length_profile(const SegmentedCorpus& corpus, std::uint32_t buckets) {
  if (buckets == 0) throw Error("tokstats", "bucket count must be at least 1");
  require_non_empty(corpus);
  std::vector<const SegmentedItem*> ranked;
  for (const auto& item : corpus.items()) ranked.push_back(&item);
  std::sort(ranked.begin(), ranked.end(), [](const SegmentedItem* a, const SegmentedItem* b) {
    if (a->frequency != b->frequency) return a->frequency > b->frequency;
    return a->word < b->word;
  });
  const double log_max = std::log(static_cast<double>(ranked.size()));
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> cells;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const double rank = static_cast<double>(i + 1);
    std::uint32_t bucket = 0;
    if (log_max > 0.0) {
      double b = std::floor(std::log(rank) / log_max * buckets);
      bucket = static_cast<std::uint32_t>(std::min<double>(b, buckets - 1));
    }
    const auto pieces = static_cast<std::uint32_t>(ranked[i]->pieces.size());
    cells[{bucket, pieces}] += ranked[i]->frequency;
  }
  std::vector<ProfileRow> rows;
  for (const auto& [key, tokens] : cells) rows.push_back({key.first, key.second, tokens});
  return rows;
}

TokStatsReport compute_report(const SegmentedCorpus& corpus, const MorphGold* gold,
                              std::string name, std::optional<std::size_t> vocabulary_size) {
  TokStatsReport r;
  r.name = std::move(name);
  r.vocabulary_size = vocabulary_size;
  r.entropy_first_bits = piece_entropy(corpus, PiecePosition::First);
  r.entropy_last_bits = piece_entropy(corpus, PiecePosition::Last);
  r.lengths = length_stats(corpus);
  if (gold != nullptr) r.agreement = morph_agreement(corpus, *gold);
  return r;
}

SegmentedCorpus read_segmented_corpus(std::istream& in, std::string continuation_prefix,
                                      std::string unk) {
  SegmentedCorpus corpus(std::move(continuation_prefix), std::move(unk));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = utf8::split(line, '\t');
    if (cols.size() != 3) {
      throw Error("tokstats", "line " + std::to_string(line_no) +
                                  ": expected word<TAB>freq<TAB>pieces, got " +
                                  std::to_string(cols.size()) + " columns");
    }
    std::uint64_t freq = 0;
    try {
      std::size_t used = 0;
      freq = std::stoull(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error("tokstats", "line " + std::to_string(line_no) + ": bad frequency '" + cols[1] + "'");
    }
    SegmentedItem item{cols[0], utf8::split_ws(cols[2]), false, freq};
    try {
      corpus.add(std::move(item));
    } catch (const Error& e) {
      throw Error("tokstats", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

MorphGold read_morph_gold(std::istream& in) {
  MorphGold gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = utf8::split(line, '\t');
    if (cols.size() != 2) {
      throw Error("tokstats", "gold line " + std::to_string(line_no) + ": expected word<TAB>morphs");
    }
    auto morphs = utf8::split_ws(cols[1]);
    std::string joined;
    for (const auto& m : morphs) joined += m;
    if (joined != cols[0]) {
      throw Error("tokstats", "gold line " + std::to_string(line_no) + ": morphemes of '" + cols[0] +
                                  "' do not concatenate to the word");
    }
    gold[cols[0]] = std::move(morphs);
  }
  return gold;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string mean_std(double mean, double sd) { return fixed(mean, 1) + "±" + fixed(sd, 1); }

std::string vocab_label(std::optional<std::size_t> size) {
  if (!size) return "--";
  if (*size >= 1000) return std::to_string((*size + 500) / 1000) + "k";
  return std::to_string(*size);
}

}  // namespace

std::string format_report_table(const std::vector<TokStatsReport>& reports) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto row = [&](std::string label, auto cell) {
    std::vector<std::string> cells;
    for (const auto& r : reports) cells.push_back(cell(r));
    rows.emplace_back(std::move(label), std::move(cells));
  };
  auto agree = [](const TokStatsReport& r, double Agreement::*field) {
    return r.agreement ? fixed((*r.agreement).*field, 2) : std::string("--");
  };
  row("", [](const TokStatsReport& r) { return r.name; });
  row("Vocabulary size", [](const TokStatsReport& r) { return vocab_label(r.vocabulary_size); });
  row("Entropy of first WP", [](const TokStatsReport& r) { return fixed(r.entropy_first_bits, 2); });
  row("Entropy of last WP", [](const TokStatsReport& r) { return fixed(r.entropy_last_bits, 2); });
  row("More than one WP",
      [](const TokStatsReport& r) { return fixed(100.0 * r.lengths.multi_piece_fraction, 1) + "%"; });
  row("Length in WP",
      [](const TokStatsReport& r) { return mean_std(r.lengths.pieces_mean, r.lengths.pieces_std); });
  row("Length of first WP", [](const TokStatsReport& r) {
    return mean_std(r.lengths.first_chars_mean, r.lengths.first_chars_std);
  });
  row("Length of last WP", [](const TokStatsReport& r) {
    return mean_std(r.lengths.last_chars_mean, r.lengths.last_chars_std);
  });
  row("Accuracy to gold", [&](const TokStatsReport& r) { return agree(r, &Agreement::full); });
  row("Accuracy to gold in first WP",
      [&](const TokStatsReport& r) { return agree(r, &Agreement::first); });
  row("Accuracy to gold in last WP",
      [&](const TokStatsReport& r) { return agree(r, &Agreement::last); });

  std::size_t label_width = 0;
  std::vector<std::size_t> widths(reports.size(), 0);
  for (const auto& [label, cells] : rows) {
    label_width = std::max(label_width, utf8::length(label));
    for (std::size_t i = 0; i < cells.size(); ++i) widths[i] = std::max(widths[i], utf8::length(cells[i]));
  }
  std::ostringstream os;
  for (const auto& [label, cells] : rows) {
    os << label << std::string(label_width - utf8::length(label), ' ');
    for (std::size_t i = 0; i < cells.size(); ++i) {
      os << "  " << std::string(widths[i] - utf8::length(cells[i]), ' ') << cells[i];
    }
    os << '\n';
  }
  return os.str();
}

std::string report_to_json(const std::vector<TokStatsReport>& reports) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["vocabulary_size"] = r.vocabulary_size ? nlohmann::ordered_json(*r.vocabulary_size) : nullptr;
    j["entropy_first_bits"] = r.entropy_first_bits;
    j["entropy_last_bits"] = r.entropy_last_bits;
    j["multi_piece_fraction"] = r.lengths.multi_piece_fraction;
    j["len_in_pieces_mean"] = r.lengths.pieces_mean;
    j["len_in_pieces_std"] = r.lengths.pieces_std;
    j["len_first_chars_mean"] = r.lengths.first_chars_mean;
    j["len_first_chars_std"] = r.lengths.first_chars_std;
    j["len_last_chars_mean"] = r.lengths.last_chars_mean;
    j["len_last_chars_std"] = r.lengths.last_chars_std;
    if (r.agreement) {
      j["agreement_full"] = r.agreement->full;
      j["agreement_first"] = r.agreement->first;
      j["agreement_last"] = r.agreement->last;
    }
    out.push_back(std::move(j));
  }
  return out.dump(2) + "\n";
}

std::string profile_to_csv(const std::vector<ProfileRow>& rows) {
  std::ostringstream os;
  os << "bucket,piece_count,tokens\n";
  for (const auto& r : rows) os << r.bucket << ',' << r.piece_count << ',' << r.tokens << '\n';
  return os.str();
}

}  // namespace swprobe
