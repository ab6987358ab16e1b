#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "swprobe/conllu.hpp"

namespace swprobe {

struct MorphTask {
  std::string name;         // e.g. "Case_NOUN"
  std::string upos;         // e.g. "NOUN"
  std::string feature_key;  // e.g. "Case"
  std::vector<std::string> label_set;
};

// Parses "Feature:UPOS", e.g. "Case:NOUN" or "Number[psor]:NOUN".
MorphTask parse_task(const std::string& spec);

struct ProbingInstance {
  std::uint64_t sentence_id = 0;
  std::vector<std::string> sentence;
  std::uint32_t target_index = 0;
  std::string label;
  std::string target_form;  // lowercased
};

struct CandidatePool {
  MorphTask task;
  // Deduplicated sentences; the index is the sentence id.
  std::vector<std::vector<std::string>> sentences;
  // One per matching (sentence, position), in corpus order.
  std::vector<ProbingInstance> candidates;
};

struct SplitSizes {
  std::size_t train = 2000;
  std::size_t dev = 200;
  std::size_t test = 2000;
};

struct ProbingDataset {
  MorphTask task;  // label_set holds the labels kept after filtering
  std::vector<ProbingInstance> train, dev, test;
  std::uint64_t seed = 0;
  SplitSizes sizes;
  std::vector<std::string> dropped_labels;
};

CandidatePool extract_candidates(const std::vector<ConlluSentence>& corpus, const MorphTask& task);

// Partitions lowercased forms across splits (seeded hash, proportional to the
// requested sizes), balances labels inside each split by water-filling under
// the imbalance cap, dropping the rarest labels while the cap cannot be met,
// then samples deterministically.
ProbingDataset sample_splits(const CandidatePool& pool, SplitSizes sizes, double imbalance_cap,
                             std::uint64_t seed);

// Split index in {0: train, 1: dev, 2: test} for a lowercased form.
int split_for_form(const std::string& lowered_form, SplitSizes sizes, std::uint64_t seed);

// `sentence_id<TAB>target_index<TAB>label<TAB>space-joined words`
std::string split_to_tsv(const std::vector<ProbingInstance>& split);
std::vector<ProbingInstance> read_split_tsv(std::istream& in);
std::string manifest_json(const ProbingDataset& ds);

// train.tsv, dev.tsv, test.tsv, manifest.json and sentences.txt (one
// deduplicated sentence per line, line index = sentence id) as (name, content).
std::vector<std::pair<std::string, std::string>> dataset_files(const ProbingDataset& ds,
                                                                const CandidatePool& pool);
// Writes dataset_files() into `dir`.
std::vector<std::filesystem::path> write_dataset(const ProbingDataset& ds, const CandidatePool& pool,
                                                 const std::filesystem::path& dir);

struct LoadedDataset {
  std::vector<ProbingInstance> train, dev, test;
  std::vector<std::string> label_set;
};
LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace swprobe
