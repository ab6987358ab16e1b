// Independent reference implementations and synthetic fixtures shared by the
// unit tests and the acceptance runner. Nothing here calls into the code it
// is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "swprobe/embedding_store.hpp"
#include "swprobe/probe.hpp"
#include "swprobe/probe_dataset.hpp"
#include "swprobe/tokstats.hpp"

namespace fixture {

using Engine = std::mt19937_64;

inline std::size_t pick(Engine& e, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(e); }

// ---- tokenizer -------------------------------------------------------------

// Alphabet mixing ASCII and two-byte code points so byte/code-point confusion
// shows up.
inline const std::vector<std::string>& toy_alphabet() {
  static const std::vector<std::string> a = {"a", "b", "c", "d", "e", "k", "l", "s", "z", "á", "é", "ő", "ű"};
  return a;
}

inline std::string random_word(Engine& e, std::size_t max_len, const std::vector<std::string>& alphabet) {
  std::size_t n = 1 + pick(e, max_len);
  std::string w;
  for (std::size_t i = 0; i < n; ++i) w += alphabet[pick(e, alphabet.size())];
  return w;
}

// Random vocabulary: specials, most single characters in both forms, and
// random multi-character pieces. Some characters are left out so that UNK
// words occur.
inline std::vector<std::string> random_toy_vocab(Engine& e, std::size_t extra) {
  const auto& alpha = toy_alphabet();
  std::vector<std::string> v = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  std::set<std::string> seen(v.begin(), v.end());
  auto add = [&](const std::string& s) {
    if (seen.insert(s).second) v.push_back(s);
  };
  for (const auto& c : alpha) {
    if (pick(e, 10) != 0) add(c);
    if (pick(e, 10) != 0) add("##" + c);
  }
  for (std::size_t i = 0; i < extra; ++i) {
    std::string piece = random_word(e, 5, alpha);
    add(pick(e, 2) ? piece : "##" + piece);
  }
  return v;
}

// Leftmost-longest by exhaustive scan of every entry at every position.
inline std::vector<std::string> oracle_tokenize(const std::vector<std::string>& vocab, const std::string& word,
                                                const std::string& prefix = "##", const std::string& unk = "[UNK]") {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::string best;
    std::size_t best_len = 0;
    for (const auto& entry : vocab) {
      std::string surface;
      if (pos == 0) {
        if (entry.rfind(prefix, 0) == 0) continue;
        surface = entry;
      } else {
        if (entry.rfind(prefix, 0) != 0) continue;
        surface = entry.substr(prefix.size());
      }
      if (surface.empty() || word.compare(pos, surface.size(), surface) != 0) continue;
      if (surface.size() > best_len) {
        best_len = surface.size();
        best = entry;
      }
    }
    if (best_len == 0) return {unk};
    out.push_back(best);
    pos += best_len;
  }
  return out;
}

// ---- token statistics ------------------------------------------------------

struct RefStats {
  double h_first = 0, h_last = 0, multi = 0;
  double len_mean = 0, len_std = 0, first_mean = 0, first_std = 0, last_mean = 0, last_std = 0;
  double full = 0, first = 0, last = 0;
};

inline std::size_t cp_len(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

// One pass over (word, freq, pieces), with plain double accumulators.
inline RefStats reference_stats(const std::vector<swprobe::SegmentedItem>& items, const swprobe::MorphGold& gold,
                                const std::string& prefix = "##", const std::string& unk = "[UNK]") {
  double n = 0, multi = 0, s1 = 0, s2 = 0, f1 = 0, f2 = 0, l1 = 0, l2 = 0, full = 0, first = 0, last = 0;
  std::map<std::string, double> firsts, lasts;
  auto bare = [&](const std::string& p) { return p.rfind(prefix, 0) == 0 ? p.substr(prefix.size()) : p; };
  for (const auto& it : items) {
    const double f = static_cast<double>(it.frequency);
    const auto& p = it.pieces;
    n += f;
    firsts[p.front()] += f;
    lasts[p.back()] += f;
    if (p.size() > 1) multi += f;
    const double k = static_cast<double>(p.size());
    s1 += f * k;
    s2 += f * k * k;
    const double a = static_cast<double>(cp_len(p.front()));
    f1 += f * a;
    f2 += f * a * a;
    const double b = static_cast<double>(cp_len(p.size() == 1 ? p.back() : bare(p.back())));
    l1 += f * b;
    l2 += f * b * b;
    const bool is_unk = p.size() == 1 && p[0] == unk;
    const auto& m = gold.at(it.word);
    if (is_unk) continue;
    std::vector<std::string> stripped;
    for (std::size_t i = 0; i < p.size(); ++i) stripped.push_back(i == 0 ? p[i] : bare(p[i]));
    if (stripped == m) full += f;
    if (stripped.front() == m.front()) first += f;
    if (stripped.back() == m.back()) last += f;
  }
  auto entropy = [&](const std::map<std::string, double>& c) {
    double h = 0;
    for (const auto& [k, v] : c) h += v / n * std::log2(n / v);
    return h;
  };
  RefStats r;
  r.h_first = entropy(firsts);
  r.h_last = entropy(lasts);
  r.multi = multi / n;
  r.len_mean = s1 / n;
  r.len_std = std::sqrt(std::max(0.0, s2 / n - r.len_mean * r.len_mean));
  r.first_mean = f1 / n;
  r.first_std = std::sqrt(std::max(0.0, f2 / n - r.first_mean * r.first_mean));
  r.last_mean = l1 / n;
  r.last_std = std::sqrt(std::max(0.0, l2 / n - r.last_mean * r.last_mean));
  r.full = full / n;
  r.first = first / n;
  r.last = last / n;
  return r;
}

// Words built from gold morphemes, segmented by a random procedure that
// sometimes follows morpheme boundaries. Returns items and gold.
struct SegFixture {
  std::vector<swprobe::SegmentedItem> items;
  swprobe::MorphGold gold;
};

inline SegFixture random_segmented(Engine& e, std::size_t words) {
  static const std::vector<std::string> stems = {"ház", "szállító", "jármű", "kert", "alma", "ló", "könyv", "víz", "kéz", "ablak"};
  static const std::vector<std::string> sufs = {"vek", "kel", "ban", "ból", "nak", "ok", "ek", "hoz", "ért", "ig"};
  SegFixture fx;
  while (fx.items.size() < words) {
    std::vector<std::string> morphs = {stems[pick(e, stems.size())]};
    if (pick(e, 3)) morphs.push_back(stems[pick(e, stems.size())]);
    for (std::size_t k = pick(e, 4); k > 0; --k) morphs.push_back(sufs[pick(e, sufs.size())]);
    std::string word;
    for (const auto& m : morphs) word += m;
    if (fx.gold.contains(word)) continue;
    fx.gold[word] = morphs;
    swprobe::SegmentedItem item;
    item.word = word;
    item.frequency = 1 + pick(e, 50);
    switch (pick(e, 4)) {
      case 0:
        item.pieces = {"[UNK]"};
        item.is_unknown = true;
        break;
      case 1:
        for (std::size_t i = 0; i < morphs.size(); ++i) item.pieces.push_back(i ? "##" + morphs[i] : morphs[i]);
        break;
      default: {
        // Cut at random code-point boundaries.
        std::vector<std::size_t> cuts;
        for (std::size_t i = 1; i < word.size(); ++i) {
          if ((static_cast<unsigned char>(word[i]) & 0xC0) != 0x80 && pick(e, 3) == 0) cuts.push_back(i);
        }
        std::size_t start = 0;
        cuts.push_back(word.size());
        for (auto c : cuts) {
          std::string piece = word.substr(start, c - start);
          item.pieces.push_back(start ? "##" + piece : piece);
          start = c;
        }
      }
    }
    fx.items.push_back(item);
  }
  return fx;
}

// ---- probing datasets ------------------------------------------------------

// Synthetic CoNLL-U text. NOUN tokens carry Case drawn from `label_weights`;
// forms are drawn from a pool so that forms repeat across sentences.
inline std::string synthetic_conllu(Engine& e, std::size_t sentences, const std::vector<std::pair<std::string, double>>& label_weights,
                                    std::size_t form_pool = 6000) {
  std::vector<double> w;
  for (const auto& [l, x] : label_weights) w.push_back(x);
  std::discrete_distribution<std::size_t> label(w.begin(), w.end());
  static const std::vector<std::string> syl = {"ka", "lo", "mé", "szi", "tő", "rü", "ba", "ne", "gyö", "há", "vi", "zu"};
  auto form = [&](std::size_t id) {
    std::string s;
    std::size_t x = id;
    do {
      s += syl[x % syl.size()];
      x /= syl.size();
    } while (x > 0);
    return s;
  };
  std::ostringstream os;
  for (std::size_t s = 0; s < sentences; ++s) {
    os << "# sent_id = " << s << "\n";
    std::size_t len = 3 + pick(e, 6);
    for (std::size_t i = 1; i <= len; ++i) {
      bool noun = pick(e, 2) == 0;
      std::string f = form(pick(e, form_pool));
      if (pick(e, 5) == 0) f[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(f[0])));
      os << i << '\t' << f << '\t' << f << '\t' << (noun ? "NOUN" : "VERB") << "\t_\t";
      if (noun) os << "Case=" << label_weights[label(e)].first << "|Number=Sing";
      else os << "Mood=Ind";
      os << '\t' << (i == 1 ? 0 : 1) << "\t_\t_\t_\n";
    }
    os << "\n";
  }
  return os.str();
}

inline std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Returns an empty string when the dataset satisfies size, cap, disjointness
// and target consistency; otherwise a description of the first violation.
inline std::string check_dataset(const swprobe::ProbingDataset& ds, const swprobe::SplitSizes& sizes, double cap) {
  const std::vector<const std::vector<swprobe::ProbingInstance>*> splits = {&ds.train, &ds.dev, &ds.test};
  const std::size_t want[] = {sizes.train, sizes.dev, sizes.test};
  std::vector<std::set<std::string>> forms(3);
  std::set<std::string> labels(ds.task.label_set.begin(), ds.task.label_set.end());
  for (int s = 0; s < 3; ++s) {
    const auto& split = *splits[s];
    if (split.size() != want[s]) return "split " + std::to_string(s) + " has " + std::to_string(split.size()) + " instances";
    std::map<std::string, std::size_t> counts;
    for (const auto& inst : split) {
      if (!labels.contains(inst.label)) return "label " + inst.label + " not in label set";
      if (inst.target_index >= inst.sentence.size()) return "target index out of range";
      if (lower_ascii(inst.sentence[inst.target_index]) != inst.target_form) return "target form mismatch";
      ++counts[inst.label];
      forms[s].insert(inst.target_form);
    }
    if (want[s] == 0) continue;
    if (counts.size() != labels.size()) return "split " + std::to_string(s) + " misses a label";
    std::size_t mn = SIZE_MAX, mx = 0;
    for (const auto& [l, c] : counts) {
      mn = std::min(mn, c);
      mx = std::max(mx, c);
    }
    if (static_cast<double>(mx) > cap * static_cast<double>(mn)) return "split " + std::to_string(s) + " breaks the cap";
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      for (const auto& f : forms[a]) {
        if (forms[b].contains(f)) return "form '" + f + "' in two splits";
      }
    }
  }
  return {};
}

// ---- embedding stores ------------------------------------------------------

// Fills each record's tensor with fn(sentence id, word index or -1 for CLS/SEP,
// layer, subword position, out row).
using RowFn = std::function<void(std::uint64_t, int, std::uint32_t, std::uint32_t, float*)>;

inline swprobe::EmbeddingStore make_store(const std::vector<std::size_t>& word_counts, std::uint32_t layers,
                                          std::uint32_t hidden, Engine& e, const RowFn& fn,
                                          std::size_t max_pieces = 3, std::uint64_t first_id = 0) {
  swprobe::EmbeddingStore st;
  st.header.num_layers_total = layers;
  st.header.hidden = hidden;
  st.header.model_name = "synthetic";
  for (std::size_t s = 0; s < word_counts.size(); ++s) {
    swprobe::EmbeddingRecord r;
    r.sentence_id = first_id + s;
    std::uint32_t pos = 1;
    std::vector<int> owner = {-1};
    for (std::size_t w = 0; w < word_counts[s]; ++w) {
      std::uint32_t k = 1 + static_cast<std::uint32_t>(pick(e, max_pieces));
      r.spans.push_back({pos, pos + k});
      for (std::uint32_t i = 0; i < k; ++i) owner.push_back(static_cast<int>(w));
      pos += k;
    }
    owner.push_back(-1);
    r.num_subwords = pos + 1;
    r.tensor.assign(std::size_t(layers) * r.num_subwords * hidden, 0.0f);
    for (std::uint32_t l = 0; l < layers; ++l) {
      for (std::uint32_t t = 0; t < r.num_subwords; ++t) {
        fn(r.sentence_id, owner[t], l, t, r.tensor.data() + (std::size_t(l) * r.num_subwords + t) * hidden);
      }
    }
    st.records.push_back(std::move(r));
  }
  st.header.sentence_count = st.records.size();
  return st;
}

inline bool bit_identical(const swprobe::EmbeddingStore& a, const swprobe::EmbeddingStore& b) {
  if (!(a.header == b.header) || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.sentence_id != y.sentence_id || x.num_subwords != y.num_subwords || !(x.spans == y.spans)) return false;
    if (x.tensor.size() != y.tensor.size()) return false;
    if (std::memcmp(x.tensor.data(), y.tensor.data(), x.tensor.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

// ---- NER -------------------------------------------------------------------

inline std::string tag_type(const std::string& t) { return t.size() > 2 ? t.substr(2) : std::string(); }

// Enumerates every (start, end) and keeps those that form a maximal span:
// opened by B-X or by an I-X whose left neighbour is not tagged X, continued
// by I-X only, and not continuable to the right.
inline std::set<std::tuple<std::size_t, std::string, std::size_t, std::size_t>> brute_spans(
    const std::vector<std::vector<std::string>>& seqs) {
  std::set<std::tuple<std::size_t, std::string, std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& t = seqs[s];
    for (std::size_t a = 0; a < t.size(); ++a) {
      if (t[a] == "O") continue;
      const std::string x = tag_type(t[a]);
      bool opens = t[a][0] == 'B' || a == 0 || t[a - 1] == "O" || tag_type(t[a - 1]) != x;
      if (!opens) continue;
      for (std::size_t b = a + 1; b <= t.size(); ++b) {
        bool inner = true;
        for (std::size_t k = a + 1; k < b; ++k) inner = inner && t[k] == "I-" + x;
        if (!inner) break;
        if (b == t.size() || t[b] != "I-" + x) out.insert({s, x, a, b});
      }
    }
  }
  return out;
}

struct RefF1 {
  std::size_t gold = 0, pred = 0, correct = 0;
  double p = 0, r = 0, f1 = 0;
};

inline RefF1 brute_f1(const std::vector<std::vector<std::string>>& pred, const std::vector<std::vector<std::string>>& gold) {
  auto ps = brute_spans(pred), gs = brute_spans(gold);
  RefF1 r;
  r.gold = gs.size();
  r.pred = ps.size();
  for (const auto& s : ps) r.correct += gs.contains(s);
  r.p = r.pred ? double(r.correct) / double(r.pred) : 0.0;
  r.r = r.gold ? double(r.correct) / double(r.gold) : 0.0;
  r.f1 = r.p + r.r > 0 ? 2 * r.p * r.r / (r.p + r.r) : 0.0;
  return r;
}

inline std::vector<std::string> random_bio(Engine& e, std::size_t n) {
  static const std::vector<std::string> tags = {"O", "O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"};
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(tags[pick(e, tags.size())]);
  return t;
}

// ---- probe ---------------------------------------------------------------

// Mean NLL recomputed from eval-mode forward passes.
inline double nll(const swprobe::ProbeModel& m, const swprobe::FeatureMatrix& data) {
  double s = 0;
  for (std::size_t i = 0; i < data.size(); ++i) s -= swprobe::forward(m, data.row(i))[data.labels[i]];
  return s / double(data.size());
}

// Max over parameters of |g - fd| / max(|g|, |fd|, floor) with central
// differences of step h.
inline double grad_check(const swprobe::ProbeModel& model, const swprobe::FeatureMatrix& data, double h = 1e-5,
                         double floor = 1e-7) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto lg = swprobe::loss_and_grads(model, data, all, 0.0, nullptr);
  swprobe::ProbeModel m = model;
  double worst = 0;
  for (std::size_t p = 0; p < m.parameter_count(); ++p) {
    const double keep = m.parameters()[p];
    m.parameters()[p] = keep + h;
    const double up = nll(m, data);
    m.parameters()[p] = keep - h;
    const double down = nll(m, data);
    m.parameters()[p] = keep;
    const double fd = (up - down) / (2 * h);
    const double g = lg.grads[p];
    worst = std::max(worst, std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor}));
  }
  return worst;
}

// Random model and data, at most ~1k parameters.
inline std::pair<swprobe::ProbeModel, swprobe::FeatureMatrix> random_probe_problem(Engine& e, bool mix) {
  const std::uint32_t layers = mix ? 2 + std::uint32_t(pick(e, 3)) : 1;
  const std::uint32_t hidden = 2 + std::uint32_t(pick(e, 10));
  const std::uint32_t classes = 2 + std::uint32_t(pick(e, 4));
  const std::uint32_t width = 4 + std::uint32_t(pick(e, 40));
  swprobe::ProbeModel m(mix ? swprobe::LayerMode::Mix : swprobe::LayerMode::Single, layers, hidden, classes, width);
  swprobe::Rng rng(e());
  m.initialize(rng);
  std::normal_distribution<double> g;
  for (auto& x : m.b1()) x = 0.1 * g(e);
  for (auto& x : m.b2()) x = 0.1 * g(e);
  for (auto& x : m.mix_logits()) x = g(e);
  swprobe::FeatureMatrix data;
  data.layers = m.input_layers();
  data.hidden = hidden;
  std::vector<float> row(data.row_size());
  for (int i = 0; i < 8; ++i) {
    for (auto& v : row) v = float(g(e));
    data.push(row, std::int32_t(pick(e, classes)));
  }
  return {m, data};
}

// Textbook bias-corrected Adam on f(x) = x^2.
inline std::vector<double> reference_adam_x2(double x, int steps, double lr, double b1, double b2, double eps) {
  std::vector<double> traj;
  double m = 0, v = 0;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2 * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    traj.push_back(x);
  }
  return traj;
}

}  // namespace fixture
