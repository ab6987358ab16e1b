#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swprobe/embedding_store.hpp"
#include "swprobe/probe.hpp"
#include "swprobe/probe_dataset.hpp"
#include "swprobe/sequence_eval.hpp"

namespace swprobe {

// Which representation feeds the classifier: one layer, or the learned mix.
struct LayerSelection {
  LayerMode mode = LayerMode::Single;
  std::uint32_t layer = 0;  // single-layer mode only

  static LayerSelection mix() { return {LayerMode::Mix, 0}; }
  static LayerSelection single(std::uint32_t layer) { return {LayerMode::Single, layer}; }
};

// Accepts "mix", a layer number, or embedding|first|middle|highest.
LayerSelection parse_layer_selection(const std::string& text, std::uint32_t num_layers_total);
std::string describe(const LayerSelection& sel);

struct WordRef {
  std::uint64_t sentence_id;
  std::uint32_t word_index;
  std::int32_t label;
  std::uint32_t expected_words;  // 0 skips the word-count check
};

// Pools each referenced word; mix mode stacks every layer.
FeatureMatrix build_features(const EmbeddingStore& store, const std::vector<WordRef>& words, Pooling pooling,
                             const LayerSelection& sel);

struct ProbeRun {
  TrainResult result;
  std::vector<std::string> labels;
  LayerSelection selection;
  Pooling pooling;
};

ProbeRun train_probe(const LoadedDataset& dataset, const EmbeddingStore& store, Pooling pooling,
                     const LayerSelection& sel, const TrainerConfig& config);

enum class TagTask { Pos, Ner };

// Sentences are looked up in the store by their index in the concatenation
// train, dev, test.
struct TaggingCorpus {
  TagTask task = TagTask::Pos;
  std::vector<TaggedSentence> train, dev, test;

  std::uint64_t first_id(Split split) const;
};

struct TaggerRun {
  TrainResult result;
  std::vector<std::string> labels;
  // Accuracy for POS, span F1 for NER.
  double dev_metric = 0, test_metric = 0;
  double test_accuracy = 0;
  LayerSelection selection;
  Pooling pooling;
};

TaggerRun train_tagger(const TaggingCorpus& corpus, const EmbeddingStore& store, Pooling pooling,
                       const LayerSelection& sel, const TrainerConfig& config);

struct SweepModel {
  std::string name;
  const EmbeddingStore* store;
};

enum class SweepTask { Probe, Pos, Ner };

struct SweepSpec {
  SweepTask task = SweepTask::Probe;
  const LoadedDataset* probe_data = nullptr;
  const TaggingCorpus* tagging = nullptr;
  std::vector<SweepModel> models;
  std::vector<Pooling> poolings = {Pooling::First, Pooling::Last};
  std::vector<LayerKind> kinds = {LayerKind::Embedding, LayerKind::First, LayerKind::Middle, LayerKind::Highest};
  bool all_layers = false;  // every layer index instead of `kinds`
  bool include_mix = false;
  TrainerConfig config;     // config.seed is the global seed
  std::size_t jobs = 1;
};

struct SweepCell {
  std::string model;
  std::string layer;  // kind names joined by '+', a layer number, or "mix"
  std::int64_t layer_index = -1;  // -1 for mix
  Pooling pooling = Pooling::Last;
  std::uint64_t seed = 0;
};

struct SweepRow {
  SweepCell cell;
  double dev_metric = 0, test_metric = 0, test_accuracy = 0;
  std::size_t best_epoch = 0;
  std::vector<double> mix_weights;
};

// Cells in emission order: model, pooling, layer (ascending index, mix last).
// Kinds resolving to the same index share one cell.
std::vector<SweepCell> sweep_cells(const SweepSpec& spec);
std::vector<SweepRow> layer_sweep(const SweepSpec& spec);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);
std::string sweep_to_json(const std::vector<SweepRow>& rows, const std::string& metric_name);
// Text grid: one line per (model, pooling), one column per layer.
std::string sweep_table(const std::vector<SweepRow>& rows);

// History/result JSON of a single run.
std::string run_to_json(const TrainResult& result, const std::vector<std::string>& labels,
                        const LayerSelection& sel, Pooling pooling, const std::string& metric_name);

}  // namespace swprobe
