#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "swprobe/probe.hpp"

namespace swprobe::workflow {

namespace fs = std::filesystem;

struct Artifact {
  fs::path path;
  std::string content;
};

// A workflow's results, held in memory until the run has fully succeeded so
// that a failing run leaves nothing on disk.
struct Outcome {
  std::vector<Artifact> artifacts;
  std::string summary;  // printed to stdout
};

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const fs::path& path);

// Throws Error("config") naming the first path that does not exist.
void require_paths(const std::vector<fs::path>& paths);

// Writes every artifact and a manifest recording the workflow, a hash of its
// canonical configuration, input digests and artifact digests. Returns the
// manifest path.
fs::path commit(const std::string& workflow, const std::vector<std::pair<std::string, std::string>>& config,
                const std::vector<fs::path>& inputs, const Outcome& outcome, const fs::path& manifest_path);

struct TokenizeOptions {
  fs::path vocab, input, out;
  fs::path segmented_out;  // optional aggregated word<TAB>freq<TAB>pieces
  std::string prefix = "##", unk = "[UNK]";
};
Outcome tokenize(const TokenizeOptions& o);

struct TrainVocabOptions {
  fs::path input, out;
  std::size_t size = 0;
  std::string prefix = "##";
};
Outcome train_vocab(const TrainVocabOptions& o);

struct TokstatsOptions {
  // name=path pairs
  std::vector<std::pair<std::string, fs::path>> segmented;
  std::vector<std::pair<std::string, fs::path>> vocabs;  // tokenized against `corpus`
  fs::path corpus, gold, out;
  std::uint32_t buckets = 10;
  std::string prefix = "##", unk = "[UNK]";
};
Outcome tokstats(const TokstatsOptions& o);

struct GenprobeOptions {
  fs::path conllu, out;
  std::string task;
  std::size_t train = 2000, dev = 200, test = 2000;
  double cap = 3.0;
  std::uint64_t seed = 0;
};
Outcome genprobe(const GenprobeOptions& o);

struct ExtractCheckOptions {
  fs::path store;
  fs::path sentences;  // optional: one whitespace-tokenized sentence per line
};
// Throws on the first violation; the summary is a JSON object.
Outcome extract_check(const ExtractCheckOptions& o);

struct ProbeTrainOptions {
  fs::path data, store, out;
  std::string pool = "last", layer = "mix";
  TrainerConfig trainer;
};
Outcome probe_train(const ProbeTrainOptions& o);

struct TagTrainOptions {
  std::string task = "pos";
  fs::path train, dev, test, store, out;
  std::string pool = "last", layer = "mix";
  TrainerConfig trainer;
};
Outcome tag_train(const TagTrainOptions& o);

struct SweepOptions {
  std::string task = "probe";
  fs::path data;              // probe
  fs::path train, dev, test;  // pos / ner
  std::vector<std::pair<std::string, fs::path>> stores;
  std::vector<std::string> pools = {"first", "last"};
  std::vector<std::string> layers = {"embedding", "first", "middle", "highest"};
  bool mix = false;
  std::size_t jobs = 1;
  fs::path out;
  TrainerConfig trainer;
};
Outcome sweep(const SweepOptions& o);

struct ReportOptions {
  std::vector<fs::path> inputs;  // sweep.json files
  fs::path out;                  // optional directory
};
Outcome report(const ReportOptions& o);

std::pair<std::string, fs::path> parse_named_path(const std::string& text);

}  // namespace swprobe::workflow
