#include "swprobe/workflow.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "swprobe/conllu.hpp"
#include "swprobe/embedding_store.hpp"
#include "swprobe/error.hpp"
#include "swprobe/experiments.hpp"
#include "swprobe/kernels.hpp"
#include "swprobe/probe_dataset.hpp"
#include "swprobe/sequence_eval.hpp"
#include "swprobe/tokenizer.hpp"
#include "swprobe/tokstats.hpp"
#include "swprobe/utf8.hpp"

namespace swprobe::workflow {
namespace {

using json = nlohmann::ordered_json;

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + p.string());
  return in;
}

std::string read_file(const fs::path& p) {
  auto in = open_in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) throw Error("io", "cannot write " + p.string());
}

std::vector<std::vector<std::string>> read_sentences(const fs::path& p) {
  auto in = open_in(p);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(utf8::split_ws(line));
  return out;
}

std::vector<ConlluSentence> read_conllu_file(const fs::path& p) {
  auto in = open_in(p);
  try {
    return read_conllu(in);
  } catch (const Error& e) {
    throw Error(e.kind(), p.string() + ": " + e.what());
  }
}

Vocabulary read_vocab(const fs::path& p, const std::string& prefix, const std::string& unk) {
  auto in = open_in(p);
  SpecialTokens specials;
  specials.unk = unk;
  try {
    return load_vocabulary(in, prefix, specials);
  } catch (const Error& e) {
    throw Error(e.kind(), p.string() + ": " + e.what());
  }
}

// Segments every whitespace token of a text corpus, counting occurrences.
SegmentedCorpus segment_corpus(const Vocabulary& vocab, const fs::path& corpus_path) {
  SegmentedCorpus corpus(vocab.continuation_prefix(), vocab.specials().unk);
  std::map<std::string, std::uint64_t> counts;
  auto in = open_in(corpus_path);
  std::string line;
  while (std::getline(in, line)) {
    for (auto& w : utf8::split_ws(line)) ++counts[w];
  }
  for (const auto& [word, count] : counts) corpus.add_occurrences(tokenize_word(vocab, word), count);
  return corpus;
}

std::string segmented_tsv(const SegmentedCorpus& corpus) {
  std::vector<const SegmentedItem*> items;
  for (const auto& it : corpus.items()) items.push_back(&it);
  std::sort(items.begin(), items.end(), [](auto* a, auto* b) { return a->word < b->word; });
  std::ostringstream os;
  for (const auto* it : items) {
    os << it->word << '\t' << it->frequency << '\t';
    for (std::size_t i = 0; i < it->pieces.size(); ++i) os << (i ? " " : "") << it->pieces[i];
    os << '\n';
  }
  return os.str();
}

std::vector<fs::path> directory_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

TaggingCorpus load_tagging(const std::string& task, const fs::path& train, const fs::path& dev, const fs::path& test) {
  TaggingCorpus c;
  if (task == "pos") {
    c.task = TagTask::Pos;
    c.train = pos_sentences(read_conllu_file(train));
    c.dev = pos_sentences(read_conllu_file(dev));
    c.test = pos_sentences(read_conllu_file(test));
  } else if (task == "ner") {
    c.task = TagTask::Ner;
    auto load = [](const fs::path& p) {
      auto in = open_in(p);
      try {
        return read_ner_tsv(in);
      } catch (const Error& e) {
        throw Error(e.kind(), p.string() + ": " + e.what());
      }
    };
    c.train = load(train);
    c.dev = load(dev);
    c.test = load(test);
  } else {
    throw Error("config", "unknown tagging task '" + task + "' (pos|ner)");
  }
  return c;
}

Pooling pooling_arg(const std::string& s) { return parse_pooling(s); }

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("io", "SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

void require_paths(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) {
    if (p.empty()) continue;
    if (!fs::exists(p)) throw Error("config", "input path does not exist: " + p.string());
  }
}

fs::path commit(const std::string& workflow, const std::vector<std::pair<std::string, std::string>>& config,
                const std::vector<fs::path>& inputs, const Outcome& outcome, const fs::path& manifest_path) {
  auto sorted = config;
  std::sort(sorted.begin(), sorted.end());
  json cfg = json::object();
  for (const auto& [k, v] : sorted) cfg[k] = v;

  json manifest;
  manifest["workflow"] = workflow;
  manifest["config"] = cfg;
  manifest["config_sha256"] = sha256_hex(cfg.dump());
  manifest["kernels"] = std::string(kernels::name(kernels::active().isa));
  manifest["inputs"] = json::array();
  for (const auto& in : inputs) {
    if (in.empty()) continue;
    std::vector<fs::path> files = fs::is_directory(in) ? directory_files(in) : std::vector<fs::path>{in};
    for (const auto& f : files) manifest["inputs"].push_back({{"path", f.string()}, {"sha256", file_sha256(f)}});
  }
  manifest["artifacts"] = json::array();
  for (const auto& a : outcome.artifacts) {
    write_file(a.path, a.content);
    manifest["artifacts"].push_back({{"path", a.path.string()}, {"sha256", sha256_hex(a.content)}});
  }
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

std::pair<std::string, fs::path> parse_named_path(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos) return {fs::path(text).stem().string(), fs::path(text)};
  if (eq == 0 || eq + 1 == text.size()) throw Error("config", "expected NAME=PATH, got '" + text + "'");
  return {text.substr(0, eq), fs::path(text.substr(eq + 1))};
}

Outcome tokenize(const TokenizeOptions& o) {
  require_paths({o.vocab, o.input});
  const Vocabulary vocab = read_vocab(o.vocab, o.prefix, o.unk);
  std::ostringstream tsv;
  SegmentedCorpus corpus(o.prefix, o.unk);
  auto in = open_in(o.input);
  std::string line;
  std::size_t tokens = 0, unknown = 0;
  while (std::getline(in, line)) {
    for (const auto& w : utf8::split_ws(line)) {
      const Segmentation seg = tokenize_word(vocab, w);
      tsv << w << '\t';
      for (std::size_t i = 0; i < seg.pieces.size(); ++i) tsv << (i ? " " : "") << seg.pieces[i];
      tsv << '\n';
      ++tokens;
      unknown += seg.is_unknown;
      if (!o.segmented_out.empty()) corpus.add_occurrences(seg);
    }
  }
  Outcome out;
  out.artifacts.push_back({o.out, tsv.str()});
  if (!o.segmented_out.empty()) out.artifacts.push_back({o.segmented_out, segmented_tsv(corpus)});
  out.summary = "tokenized " + std::to_string(tokens) + " tokens (" + std::to_string(unknown) + " unknown)\n";
  return out;
}

Outcome train_vocab(const TrainVocabOptions& o) {
  require_paths({o.input});
  std::map<std::string, std::uint64_t> counts;
  auto in = open_in(o.input);
  std::string line;
  while (std::getline(in, line)) {
    for (auto& w : utf8::split_ws(line)) ++counts[w];
  }
  auto trained = train_vocabulary(counts, o.size, o.prefix);
  std::string text;
  for (const auto& e : trained.vocab.entries()) text += e + "\n";
  Outcome out;
  out.artifacts.push_back({o.out, text});
  out.summary = "vocabulary of " + std::to_string(trained.vocab.size()) + " entries" +
                (trained.truncated ? " (truncated: no merge candidates left before the target size)" : "") + "\n";
  return out;
}

Outcome tokstats(const TokstatsOptions& o) {
  std::vector<fs::path> inputs{o.gold};
  for (const auto& [n, p] : o.segmented) inputs.push_back(p);
  for (const auto& [n, p] : o.vocabs) inputs.push_back(p);
  if (!o.vocabs.empty()) {
    if (o.corpus.empty()) throw Error("config", "--vocab needs --corpus");
    inputs.push_back(o.corpus);
  }
  require_paths(inputs);
  if (o.segmented.empty() && o.vocabs.empty()) throw Error("config", "tokstats needs --segmented or --vocab inputs");

  MorphGold gold;
  if (!o.gold.empty()) {
    auto in = open_in(o.gold);
    gold = read_morph_gold(in);
  }
  const MorphGold* gold_ptr = o.gold.empty() ? nullptr : &gold;

  std::vector<TokStatsReport> reports;
  Outcome out;
  auto add = [&](const std::string& name, const SegmentedCorpus& corpus, std::optional<std::size_t> vsize) {
    reports.push_back(compute_report(corpus, gold_ptr, name, vsize));
    out.artifacts.push_back({o.out / ("profile_" + name + ".csv"), profile_to_csv(rank_length_profile(corpus, o.buckets))});
  };
  for (const auto& [name, path] : o.segmented) {
    auto in = open_in(path);
    try {
      add(name, read_segmented_corpus(in, o.prefix, o.unk), std::nullopt);
    } catch (const Error& e) {
      throw Error(e.kind(), path.string() + ": " + e.what());
    }
  }
  for (const auto& [name, path] : o.vocabs) {
    const Vocabulary vocab = read_vocab(path, o.prefix, o.unk);
    add(name, segment_corpus(vocab, o.corpus), vocab.size());
  }
  const std::string table = format_report_table(reports);
  out.artifacts.push_back({o.out / "tokstats.txt", table});
  out.artifacts.push_back({o.out / "tokstats.json", report_to_json(reports)});
  out.summary = table;
  return out;
}

Outcome genprobe(const GenprobeOptions& o) {
  require_paths({o.conllu});
  const MorphTask task = parse_task(o.task);
  const auto corpus = read_conllu_file(o.conllu);
  const CandidatePool pool = extract_candidates(corpus, task);
  const ProbingDataset ds = sample_splits(pool, {o.train, o.dev, o.test}, o.cap, o.seed);
  Outcome out;
  for (auto& [name, content] : dataset_files(ds, pool)) out.artifacts.push_back({o.out / name, std::move(content)});
  out.summary = ds.task.name + ": " + std::to_string(ds.task.label_set.size()) + " labels kept, " +
                std::to_string(ds.dropped_labels.size()) + " dropped\n";
  return out;
}

Outcome extract_check(const ExtractCheckOptions& o) {
  require_paths({o.store, o.sentences});
  const EmbeddingStore store = read_store_file(o.store.string());
  if (store.records.size() != store.header.sentence_count) {
    throw Error("store", "header declares " + std::to_string(store.header.sentence_count) + " records, found " +
                             std::to_string(store.records.size()));
  }
  std::size_t words = 0, min_sub = 0, max_sub = 0;
  for (std::size_t i = 0; i < store.records.size(); ++i) {
    const auto& r = store.records[i];
    words += r.num_words();
    min_sub = i == 0 ? r.num_subwords : std::min<std::size_t>(min_sub, r.num_subwords);
    max_sub = std::max<std::size_t>(max_sub, r.num_subwords);
  }
  if (!o.sentences.empty()) {
    const auto sentences = read_sentences(o.sentences);
    for (const auto& r : store.records) {
      if (r.sentence_id >= sentences.size()) {
        throw Error("store", "record sentence id " + std::to_string(r.sentence_id) + " has no line in " +
                                 o.sentences.string());
      }
      if (sentences[r.sentence_id].size() != r.num_words()) {
        throw Error("store", "sentence " + std::to_string(r.sentence_id) + " has " +
                                 std::to_string(sentences[r.sentence_id].size()) + " words but the record aligns " +
                                 std::to_string(r.num_words()));
      }
    }
  }
  json j;
  j["status"] = "ok";
  j["model"] = store.header.model_name;
  j["num_layers_total"] = store.header.num_layers_total;
  j["hidden"] = store.header.hidden;
  j["sentences"] = store.records.size();
  j["words"] = words;
  j["min_subwords"] = min_sub;
  j["max_subwords"] = max_sub;
  Outcome out;
  out.summary = j.dump(2) + "\n";
  return out;
}

Outcome probe_train(const ProbeTrainOptions& o) {
  require_paths({o.data, o.store});
  const LoadedDataset ds = load_dataset(o.data);
  const EmbeddingStore store = read_store_file(o.store.string());
  const LayerSelection sel = parse_layer_selection(o.layer, store.header.num_layers_total);
  const Pooling pooling = pooling_arg(o.pool);
  auto run = train_probe(ds, store, pooling, sel, o.trainer);
  Outcome out;
  out.artifacts.push_back({o.out, run_to_json(run.result, run.labels, sel, pooling, "accuracy")});
  out.summary = "test accuracy " + std::to_string(run.result.test_accuracy) + " (epoch " +
                std::to_string(run.result.best_epoch) + ")\n";
  return out;
}

Outcome tag_train(const TagTrainOptions& o) {
  require_paths({o.train, o.dev, o.test, o.store});
  const TaggingCorpus corpus = load_tagging(o.task, o.train, o.dev, o.test);
  const EmbeddingStore store = read_store_file(o.store.string());
  const LayerSelection sel = parse_layer_selection(o.layer, store.header.num_layers_total);
  const Pooling pooling = pooling_arg(o.pool);
  auto run = train_tagger(corpus, store, pooling, sel, o.trainer);
  const std::string metric = corpus.task == TagTask::Ner ? "span_f1" : "accuracy";
  Outcome out;
  out.artifacts.push_back({o.out, run_to_json(run.result, run.labels, sel, pooling, metric)});
  out.summary = "test " + metric + " " + std::to_string(run.test_metric) + " (epoch " +
                std::to_string(run.result.best_epoch) + ")\n";
  return out;
}

Outcome sweep(const SweepOptions& o) {
  std::vector<fs::path> inputs{o.data, o.train, o.dev, o.test};
  for (const auto& [n, p] : o.stores) inputs.push_back(p);
  require_paths(inputs);
  if (o.stores.empty()) throw Error("config", "sweep needs at least one --store NAME=PATH");

  SweepSpec spec;
  LoadedDataset probe_data;
  TaggingCorpus tagging;
  std::string metric = "accuracy";
  if (o.task == "probe") {
    if (o.data.empty()) throw Error("config", "probe sweep needs --data");
    spec.task = SweepTask::Probe;
    probe_data = load_dataset(o.data);
    spec.probe_data = &probe_data;
  } else {
    if (o.train.empty() || o.dev.empty() || o.test.empty()) throw Error("config", "tagging sweep needs --train/--dev/--test");
    tagging = load_tagging(o.task, o.train, o.dev, o.test);
    spec.task = tagging.task == TagTask::Ner ? SweepTask::Ner : SweepTask::Pos;
    spec.tagging = &tagging;
    if (tagging.task == TagTask::Ner) metric = "span_f1";
  }
  std::vector<EmbeddingStore> stores;
  stores.reserve(o.stores.size());
  for (const auto& [name, path] : o.stores) stores.push_back(read_store_file(path.string()));
  for (std::size_t i = 0; i < stores.size(); ++i) spec.models.push_back({o.stores[i].first, &stores[i]});
  spec.poolings.clear();
  for (const auto& p : o.pools) spec.poolings.push_back(pooling_arg(p));
  spec.kinds.clear();
  for (const auto& l : o.layers) {
    if (l == "all") spec.all_layers = true;
    else if (l == "mix") spec.include_mix = true;
    else spec.kinds.push_back(parse_layer_kind(l));
  }
  spec.include_mix = spec.include_mix || o.mix;
  spec.config = o.trainer;
  spec.jobs = o.jobs;
  const auto rows = layer_sweep(spec);
  Outcome out;
  out.artifacts.push_back({o.out / "sweep.csv", sweep_to_csv(rows)});
  out.artifacts.push_back({o.out / "sweep.json", sweep_to_json(rows, metric)});
  const std::string table = sweep_table(rows);
  out.artifacts.push_back({o.out / "sweep.txt", table});
  out.summary = table;
  return out;
}

Outcome report(const ReportOptions& o) {
  require_paths(o.inputs);
  if (o.inputs.empty()) throw Error("config", "report needs at least one --in sweep.json");
  std::vector<SweepRow> rows;
  std::string metric;
  for (const auto& p : o.inputs) {
    json j;
    try {
      j = json::parse(read_file(p));
      if (metric.empty()) metric = j.at("metric").get<std::string>();
      for (const auto& r : j.at("rows")) {
        SweepRow row;
        row.cell.model = r.at("model").get<std::string>();
        row.cell.layer = r.at("layer").get<std::string>();
        row.cell.layer_index = r.at("layer_index").get<std::int64_t>();
        row.cell.pooling = parse_pooling(r.at("pooling").get<std::string>());
        row.cell.seed = r.at("seed").get<std::uint64_t>();
        row.dev_metric = r.at("dev_metric").get<double>();
        row.test_metric = r.at("test_metric").get<double>();
        row.test_accuracy = r.at("test_accuracy").get<double>();
        row.best_epoch = r.at("best_epoch").get<std::size_t>();
        if (r.contains("mix_weights")) row.mix_weights = r["mix_weights"].get<std::vector<double>>();
        rows.push_back(std::move(row));
      }
    } catch (const json::exception& e) {
      throw Error("config", p.string() + ": not a sweep result (" + e.what() + ")");
    }
  }
  Outcome out;
  const std::string table = sweep_table(rows);
  out.summary = table;
  if (!o.out.empty()) {
    out.artifacts.push_back({o.out / "report.csv", sweep_to_csv(rows)});
    out.artifacts.push_back({o.out / "report.json", sweep_to_json(rows, metric)});
    out.artifacts.push_back({o.out / "report.txt", table});
  }
  return out;
}

}  // namespace swprobe::workflow
