#include "swprobe/probe_dataset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "swprobe/error.hpp"
#include "swprobe/rng.hpp"
#include "swprobe/utf8.hpp"

namespace swprobe {
namespace {

constexpr std::array<const char*, 3> kSplitNames = {"train", "dev", "test"};

std::size_t split_size(const SplitSizes& s, int split) {
  return split == 0 ? s.train : split == 1 ? s.dev : s.test;
}

// Most balanced allocation of `target` instances over labels with the given
// availability: level every label at the smallest c with sum(min(a, c)) >= target.
// No allocation has a smaller maximum or a larger minimum, so if this one
// breaks the cap, every allocation does.
std::optional<std::vector<std::size_t>> water_fill(const std::vector<std::size_t>& avail,
                                                   std::size_t target, double cap) {
  std::vector<std::size_t> take(avail.size(), 0);
  if (target == 0) return take;
  auto filled = [&](std::size_t c) {
    std::size_t s = 0;
    for (auto a : avail) s += std::min(a, c);
    return s;
  };
  std::size_t lo = 0, hi = *std::max_element(avail.begin(), avail.end());
  if (filled(hi) < target) return std::nullopt;
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (filled(mid) >= target) hi = mid; else lo = mid + 1;
  }
  const std::size_t level = lo;
  std::size_t total = 0;
  for (std::size_t i = 0; i < avail.size(); ++i) total += take[i] = std::min(avail[i], level);
  // Trim the surplus from labels sitting at the level, last label first.
  for (std::size_t i = avail.size(); i-- > 0 && total > target;) {
    if (take[i] == level) {
      --take[i];
      --total;
    }
  }
  const auto [mn, mx] = std::minmax_element(take.begin(), take.end());
  if (*mn == 0 || static_cast<double>(*mx) > cap * static_cast<double>(*mn)) return std::nullopt;
  return take;
}

}  // namespace

MorphTask parse_task(const std::string& spec) {
  auto colon = spec.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
    throw Error("task", "task must look like Feature:UPOS, got '" + spec + "'");
  }
  MorphTask t;
  t.feature_key = spec.substr(0, colon);
  t.upos = spec.substr(colon + 1);
  t.name = t.feature_key + "_" + t.upos;
  return t;
}

CandidatePool extract_candidates(const std::vector<ConlluSentence>& corpus, const MorphTask& task) {
  CandidatePool pool;
  pool.task = task;
  std::set<std::vector<std::string>> seen;
  std::set<std::string> labels;
  for (const auto& sent : corpus) {
    auto words = sent.words();
    if (!seen.insert(words).second) continue;
    const auto sid = static_cast<std::uint64_t>(pool.sentences.size());
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      const auto& tok = sent.tokens[i];
      if (tok.upos != task.upos) continue;
      auto f = tok.feats.find(task.feature_key);
      if (f == tok.feats.end()) continue;
      pool.candidates.push_back(
          {sid, words, static_cast<std::uint32_t>(i), f->second, utf8::to_lower(tok.form)});
      labels.insert(f->second);
    }
    pool.sentences.push_back(std::move(words));
  }
  pool.task.label_set.assign(labels.begin(), labels.end());
  return pool;
}

int split_for_form(const std::string& lowered_form, SplitSizes sizes, std::uint64_t seed) {
  const double total = static_cast<double>(sizes.train + sizes.dev + sizes.test);
  if (total <= 0) return 0;
  const double u =
      static_cast<double>(derive_seed(seed, "form/" + lowered_form) >> 11) * 0x1.0p-53 * total;
  if (u < static_cast<double>(sizes.train)) return 0;
  if (u < static_cast<double>(sizes.train + sizes.dev)) return 1;
  return 2;
}

ProbingDataset sample_splits(const CandidatePool& pool, SplitSizes sizes, double imbalance_cap,
                             std::uint64_t seed) {
  if (pool.candidates.empty()) throw Error("dataset", "candidate pool for " + pool.task.name + " is empty");
  if (imbalance_cap < 1.0) throw Error("dataset", "imbalance cap must be at least 1");

  // bucket[split][label] -> candidate indices in pool order
  std::array<std::map<std::string, std::vector<std::size_t>>, 3> buckets;
  std::map<std::string, int> form_split;
  for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
    const auto& c = pool.candidates[i];
    auto [it, fresh] = form_split.try_emplace(c.target_form, 0);
    if (fresh) it->second = split_for_form(c.target_form, sizes, seed);
    buckets[it->second][c.label].push_back(i);
  }

  std::set<std::string> label_pool;
  for (const auto& c : pool.candidates) label_pool.insert(c.label);
  std::vector<std::string> labels(label_pool.begin(), label_pool.end());
  std::vector<std::string> dropped;

  auto available = [&](int split, const std::string& label) -> std::size_t {
    auto it = buckets[split].find(label);
    return it == buckets[split].end() ? 0 : it->second.size();
  };

  std::array<std::vector<std::size_t>, 3> alloc;
  while (true) {
    if (labels.size() < 2) {
      throw Error("dataset", "task " + pool.task.name + " is ungeneratable: fewer than 2 labels satisfy the " +
                                 std::to_string(imbalance_cap) + ":1 imbalance cap");
    }
    std::string shortfall;
    for (int s = 0; s < 3; ++s) {
      std::size_t have = 0;
      for (const auto& l : labels) have += available(s, l);
      const std::size_t want = split_size(sizes, s);
      if (have < want) {
        shortfall += std::string(shortfall.empty() ? "" : ", ") + kSplitNames[s] + " short by " +
                     std::to_string(want - have) + " (have " + std::to_string(have) + ", need " +
                     std::to_string(want) + ")";
      }
    }
    if (!shortfall.empty()) {
      throw Error("dataset", "insufficient instances for " + pool.task.name + ": " + shortfall);
    }
    bool feasible = true;
    for (int s = 0; s < 3 && feasible; ++s) {
      std::vector<std::size_t> avail;
      for (const auto& l : labels) avail.push_back(available(s, l));
      auto take = water_fill(avail, split_size(sizes, s), imbalance_cap);
      if (take) alloc[s] = std::move(*take); else feasible = false;
    }
    if (feasible) break;

    // Drop the label with the smallest support relative to split size.
    std::size_t worst = 0;
    double worst_ratio = 0;
    for (std::size_t li = 0; li < labels.size(); ++li) {
      double ratio = std::numeric_limits<double>::infinity();
      for (int s = 0; s < 3; ++s) {
        const std::size_t want = split_size(sizes, s);
        if (want == 0) continue;
        ratio = std::min(ratio, static_cast<double>(available(s, labels[li])) / static_cast<double>(want));
      }
      if (li == 0 || ratio < worst_ratio) {
        worst = li;
        worst_ratio = ratio;
      }
    }
    dropped.push_back(labels[worst]);
    labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(worst));
  }

  ProbingDataset ds;
  ds.task = pool.task;
  ds.task.label_set = labels;
  ds.seed = seed;
  ds.sizes = sizes;
  ds.dropped_labels = dropped;
  std::array<std::vector<ProbingInstance>*, 3> outs = {&ds.train, &ds.dev, &ds.test};
  for (int s = 0; s < 3; ++s) {
    auto& out = *outs[s];
    for (std::size_t li = 0; li < labels.size(); ++li) {
      auto it = buckets[s].find(labels[li]);
      if (alloc[s][li] == 0) continue;
      std::vector<std::size_t> idx = it->second;
      Rng rng(derive_seed(seed, std::string("sample/") + kSplitNames[s] + "/" + labels[li]));
      shuffle(std::span<std::size_t>(idx), rng);
      for (std::size_t k = 0; k < alloc[s][li]; ++k) out.push_back(pool.candidates[idx[k]]);
    }
    Rng rng(derive_seed(seed, std::string("order/") + kSplitNames[s]));
    shuffle(std::span<ProbingInstance>(out), rng);
  }
  return ds;
}

std::string split_to_tsv(const std::vector<ProbingInstance>& split) {
  std::ostringstream os;
  for (const auto& inst : split) {
    os << inst.sentence_id << '\t' << inst.target_index << '\t' << inst.label << '\t';
    for (std::size_t i = 0; i < inst.sentence.size(); ++i) os << (i ? " " : "") << inst.sentence[i];
    os << '\n';
  }
  return os.str();
}

std::vector<ProbingInstance> read_split_tsv(std::istream& in) {
  std::vector<ProbingInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = utf8::split(line, '\t');
    auto bad = [&](const std::string& what) {
      return Error("dataset", "split line " + std::to_string(line_no) + ": " + what);
    };
    if (cols.size() != 4) throw bad("expected 4 columns");
    ProbingInstance inst;
    try {
      inst.sentence_id = std::stoull(cols[0]);
      inst.target_index = static_cast<std::uint32_t>(std::stoul(cols[1]));
    } catch (const std::exception&) {
      throw bad("bad sentence id or target index");
    }
    inst.label = cols[2];
    inst.sentence = utf8::split_ws(cols[3]);
    if (inst.target_index >= inst.sentence.size()) throw bad("target index outside the sentence");
    inst.target_form = utf8::to_lower(inst.sentence[inst.target_index]);
    out.push_back(std::move(inst));
  }
  return out;
}

std::string manifest_json(const ProbingDataset& ds) {
  nlohmann::ordered_json j;
  j["task"] = ds.task.name;
  j["feature"] = ds.task.feature_key;
  j["upos"] = ds.task.upos;
  j["labels"] = ds.task.label_set;
  j["dropped_labels"] = ds.dropped_labels;
  j["sizes"] = {{"train", ds.train.size()}, {"dev", ds.dev.size()}, {"test", ds.test.size()}};
  j["seed"] = ds.seed;
  return j.dump(2) + "\n";
}

std::vector<std::pair<std::string, std::string>> dataset_files(const ProbingDataset& ds,
                                                                const CandidatePool& pool) {
  std::string sentences;
  for (const auto& s : pool.sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) sentences += (i ? " " : "") + s[i];
    sentences += '\n';
  }
  return {{"train.tsv", split_to_tsv(ds.train)},
          {"dev.tsv", split_to_tsv(ds.dev)},
          {"test.tsv", split_to_tsv(ds.test)},
          {"manifest.json", manifest_json(ds)},
          {"sentences.txt", sentences}};
}

std::vector<std::filesystem::path> write_dataset(const ProbingDataset& ds, const CandidatePool& pool,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : dataset_files(ds, pool)) {
    auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw Error("io", "cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + (dir / name).string());
    return in;
  };
  LoadedDataset ds;
  {
    auto in = open("train.tsv");
    ds.train = read_split_tsv(in);
  }
  {
    auto in = open("dev.tsv");
    ds.dev = read_split_tsv(in);
  }
  {
    auto in = open("test.tsv");
    ds.test = read_split_tsv(in);
  }
  std::set<std::string> labels;
  if (std::filesystem::exists(dir / "manifest.json")) {
    auto in = open("manifest.json");
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_object() && j.contains("labels")) {
      for (const auto& l : j["labels"]) labels.insert(l.get<std::string>());
    }
  }
  if (labels.empty()) {
    for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
      for (const auto& inst : *split) labels.insert(inst.label);
    }
  }
  ds.label_set.assign(labels.begin(), labels.end());
  return ds;
}

}  // namespace swprobe
