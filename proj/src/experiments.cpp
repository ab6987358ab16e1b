#include "swprobe/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "swprobe/error.hpp"

namespace swprobe {
namespace {

std::map<std::string, std::int32_t> index_labels(const std::vector<std::string>& labels) {
  std::map<std::string, std::int32_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]] = static_cast<std::int32_t>(i);
  return out;
}

std::string fmt(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

LayerSelection parse_layer_selection(const std::string& text, std::uint32_t num_layers_total) {
  if (text == "mix") return LayerSelection::mix();
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const auto layer = std::stoul(text);
    if (layer >= num_layers_total) {
      throw Error("config", "layer " + text + " out of range, store has " + std::to_string(num_layers_total) +
                                " layers (0 = embedding layer)");
    }
    return LayerSelection::single(static_cast<std::uint32_t>(layer));
  }
  return LayerSelection::single(layer_index_for(parse_layer_kind(text), num_layers_total));
}

std::string describe(const LayerSelection& sel) {
  return sel.mode == LayerMode::Mix ? "mix" : std::to_string(sel.layer);
}

FeatureMatrix build_features(const EmbeddingStore& store, const std::vector<WordRef>& words, Pooling pooling,
                             const LayerSelection& sel) {
  const auto& h = store.header;
  if (sel.mode == LayerMode::Single && sel.layer >= h.num_layers_total) {
    throw Error("config", "layer " + std::to_string(sel.layer) + " out of range for store with " +
                              std::to_string(h.num_layers_total) + " layers");
  }
  FeatureMatrix fm;
  fm.layers = sel.mode == LayerMode::Mix ? h.num_layers_total : 1;
  fm.hidden = h.hidden;
  fm.data.reserve(words.size() * fm.row_size());
  fm.labels.reserve(words.size());
  std::vector<float> row(fm.row_size());
  for (const auto& w : words) {
    const auto idx = store.find(w.sentence_id);
    if (idx < 0) throw Error("data", "sentence id " + std::to_string(w.sentence_id) + " is missing from the store");
    const auto& rec = store.records[static_cast<std::size_t>(idx)];
    if (w.expected_words != 0 && rec.num_words() != w.expected_words) {
      throw Error("data", "sentence " + std::to_string(w.sentence_id) + " has " + std::to_string(w.expected_words) +
                              " words but its store record aligns " + std::to_string(rec.num_words()));
    }
    if (sel.mode == LayerMode::Mix) {
      for (std::uint32_t l = 0; l < h.num_layers_total; ++l) {
        pool_subwords_into(h, rec, w.word_index, l, pooling, std::span<float>(row).subspan(std::size_t(l) * h.hidden, h.hidden));
      }
    } else {
      pool_subwords_into(h, rec, w.word_index, sel.layer, pooling, row);
    }
    fm.push(row, w.label);
  }
  return fm;
}

ProbeRun train_probe(const LoadedDataset& dataset, const EmbeddingStore& store, Pooling pooling,
                     const LayerSelection& sel, const TrainerConfig& config) {
  const auto label_ids = index_labels(dataset.label_set);
  auto refs = [&](const std::vector<ProbingInstance>& split) {
    std::vector<WordRef> out;
    out.reserve(split.size());
    for (const auto& inst : split) {
      auto it = label_ids.find(inst.label);
      if (it == label_ids.end()) throw Error("data", "label '" + inst.label + "' is not in the task label set");
      out.push_back({inst.sentence_id, inst.target_index, it->second,
                     static_cast<std::uint32_t>(inst.sentence.size())});
    }
    return out;
  };
  const auto train = build_features(store, refs(dataset.train), pooling, sel);
  const auto dev = build_features(store, refs(dataset.dev), pooling, sel);
  const auto test = build_features(store, refs(dataset.test), pooling, sel);
  auto result = train_classifier(train, dev, test, sel.mode, static_cast<std::uint32_t>(dataset.label_set.size()),
                                 config);
  return {std::move(result), dataset.label_set, sel, pooling};
}

std::uint64_t TaggingCorpus::first_id(Split split) const {
  switch (split) {
    case Split::Train: return 0;
    case Split::Dev: return train.size();
    case Split::Test: return train.size() + dev.size();
  }
  return 0;
}

TaggerRun train_tagger(const TaggingCorpus& corpus, const EmbeddingStore& store, Pooling pooling,
                       const LayerSelection& sel, const TrainerConfig& config) {
  std::set<std::string> label_set;
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test}) {
    for (std::size_t i = 0; i < split->size(); ++i) {
      const auto& s = (*split)[i];
      if (s.words.size() != s.tags.size()) throw Error("data", "sentence with mismatched word and tag counts");
      label_set.insert(s.tags.begin(), s.tags.end());
    }
  }
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  const auto label_ids = index_labels(labels);

  auto features = [&](const std::vector<TaggedSentence>& split, Split which) {
    std::vector<WordRef> refs;
    const std::uint64_t base = corpus.first_id(which);
    for (std::size_t i = 0; i < split.size(); ++i) {
      const auto& s = split[i];
      for (std::size_t w = 0; w < s.words.size(); ++w) {
        refs.push_back({base + i, static_cast<std::uint32_t>(w), label_ids.at(s.tags[w]),
                        static_cast<std::uint32_t>(s.words.size())});
      }
    }
    return build_features(store, refs, pooling, sel);
  };
  const auto train = features(corpus.train, Split::Train);
  const auto dev = features(corpus.dev, Split::Dev);
  const auto test = features(corpus.test, Split::Test);

  auto to_sequences = [&](const std::vector<TaggedSentence>& split, Split which,
                          const std::vector<std::int32_t>* pred) {
    std::vector<TagSequence> out;
    std::size_t k = 0;
    const std::uint64_t base = corpus.first_id(which);
    for (std::size_t i = 0; i < split.size(); ++i) {
      TagSequence seq{base + i, {}};
      for (std::size_t w = 0; w < split[i].words.size(); ++w, ++k) {
        seq.tags.push_back(pred ? labels[static_cast<std::size_t>((*pred)[k])] : split[i].tags[w]);
      }
      out.push_back(std::move(seq));
    }
    return out;
  };
  const auto dev_gold = to_sequences(corpus.dev, Split::Dev, nullptr);
  const auto test_gold = to_sequences(corpus.test, Split::Test, nullptr);

  SplitMetric metric;
  if (corpus.task == TagTask::Ner) {
    metric = [&](Split split, const std::vector<std::int32_t>& pred) {
      const auto& sents = split == Split::Dev ? corpus.dev : corpus.test;
      const auto& gold = split == Split::Dev ? dev_gold : test_gold;
      return ner_span_f1(to_sequences(sents, split, &pred), gold).f1;
    };
  }
  TaggerRun run{train_classifier(train, dev, test, sel.mode, static_cast<std::uint32_t>(labels.size()), config, metric),
                labels, 0, 0, 0, sel, pooling};
  run.dev_metric = run.result.best_dev_metric;
  run.test_metric = run.result.test_metric;
  run.test_accuracy = run.result.test_accuracy;
  return run;
}

std::vector<SweepCell> sweep_cells(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  for (const auto& model : spec.models) {
    if (model.store == nullptr) throw Error("config", "model " + model.name + " has no store");
    const std::uint32_t L = model.store->header.num_layers_total;
    std::map<std::uint32_t, std::string> layers;
    if (spec.all_layers) {
      for (std::uint32_t l = 0; l < L; ++l) layers[l] = std::to_string(l);
    } else {
      for (LayerKind kind : spec.kinds) {
        auto& label = layers[layer_index_for(kind, L)];
        label += (label.empty() ? "" : "+") + to_string(kind);
      }
    }
    for (Pooling pooling : spec.poolings) {
      for (const auto& [index, label] : layers) {
        cells.push_back({model.name, label, static_cast<std::int64_t>(index), pooling, 0});
      }
      if (spec.include_mix) cells.push_back({model.name, "mix", -1, pooling, 0});
    }
  }
  for (auto& c : cells) {
    c.seed = derive_seed(spec.config.seed, c.model + "|" + c.layer + "|" + to_string(c.pooling));
  }
  return cells;
}

std::vector<SweepRow> layer_sweep(const SweepSpec& spec) {
  if (spec.task == SweepTask::Probe && spec.probe_data == nullptr) throw Error("config", "probe sweep needs a dataset");
  if (spec.task != SweepTask::Probe && spec.tagging == nullptr) throw Error("config", "tagging sweep needs a corpus");
  const auto cells = sweep_cells(spec);
  std::map<std::string, const EmbeddingStore*> stores;
  for (const auto& m : spec.models) stores[m.name] = m.store;

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        const auto& cell = cells[i];
        const auto& store = *stores.at(cell.model);
        TrainerConfig config = spec.config;
        config.seed = cell.seed;
        const LayerSelection sel = cell.layer_index < 0 ? LayerSelection::mix()
                                                        : LayerSelection::single(static_cast<std::uint32_t>(cell.layer_index));
        SweepRow row{cell, 0, 0, 0, 0, {}};
        if (spec.task == SweepTask::Probe) {
          auto run = train_probe(*spec.probe_data, store, cell.pooling, sel, config);
          row.dev_metric = run.result.best_dev_metric;
          row.test_metric = run.result.test_metric;
          row.test_accuracy = run.result.test_accuracy;
          row.best_epoch = run.result.best_epoch;
          row.mix_weights = run.result.model.mix_weights();
        } else {
          auto run = train_tagger(*spec.tagging, store, cell.pooling, sel, config);
          row.dev_metric = run.dev_metric;
          row.test_metric = run.test_metric;
          row.test_accuracy = run.test_accuracy;
          row.best_epoch = run.result.best_epoch;
          row.mix_weights = run.result.model.mix_weights();
        }
        rows[i] = std::move(row);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(spec.jobs, cells.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "model,layer,layer_index,pooling,dev_metric,test_metric,test_accuracy,best_epoch\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.cell.model << ',' << r.cell.layer << ',' << r.cell.layer_index << ',' << to_string(r.cell.pooling) << ','
       << r.dev_metric << ',' << r.test_metric << ',' << r.test_accuracy << ',' << r.best_epoch << '\n';
  }
  return os.str();
}

std::string sweep_to_json(const std::vector<SweepRow>& rows, const std::string& metric_name) {
  nlohmann::ordered_json j;
  j["metric"] = metric_name;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["model"] = r.cell.model;
    row["layer"] = r.cell.layer;
    row["layer_index"] = r.cell.layer_index;
    row["pooling"] = to_string(r.cell.pooling);
    row["seed"] = r.cell.seed;
    row["dev_metric"] = r.dev_metric;
    row["test_metric"] = r.test_metric;
    row["test_accuracy"] = r.test_accuracy;
    row["best_epoch"] = r.best_epoch;
    if (!r.mix_weights.empty()) row["mix_weights"] = r.mix_weights;
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> grid;
  for (const auto& r : rows) {
    if (std::find(columns.begin(), columns.end(), r.cell.layer) == columns.end()) columns.push_back(r.cell.layer);
    std::pair<std::string, std::string> key{r.cell.model, to_string(r.cell.pooling)};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    grid[key][r.cell.layer] = r.test_metric;
  }
  std::size_t label_w = 0;
  for (const auto& k : keys) label_w = std::max(label_w, k.first.size() + 1 + k.second.size());
  std::vector<std::size_t> col_w;
  for (const auto& c : columns) col_w.push_back(std::max<std::size_t>(c.size(), 6));
  std::ostringstream os;
  os << std::string(label_w, ' ');
  for (std::size_t c = 0; c < columns.size(); ++c) os << "  " << std::setw(static_cast<int>(col_w[c])) << columns[c];
  os << '\n';
  for (const auto& key : keys) {
    const std::string label = key.first + "/" + key.second;
    os << label << std::string(label_w - label.size(), ' ');
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto it = grid[key].find(columns[c]);
      os << "  " << std::setw(static_cast<int>(col_w[c])) << (it == grid[key].end() ? "--" : fmt(it->second, 4));
    }
    os << '\n';
  }
  return os.str();
}

std::string run_to_json(const TrainResult& result, const std::vector<std::string>& labels, const LayerSelection& sel,
                        Pooling pooling, const std::string& metric_name) {
  nlohmann::ordered_json j;
  j["layer"] = describe(sel);
  j["pooling"] = to_string(pooling);
  j["labels"] = labels;
  j["metric"] = metric_name;
  j["parameters"] = result.model.parameter_count();
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& e : result.history) {
    j["history"].push_back({{"epoch", e.epoch},
                            {"train_loss", e.train_loss},
                            {"train_accuracy", e.train_accuracy},
                            {"dev_loss", e.dev_loss},
                            {"dev_accuracy", e.dev_accuracy},
                            {"dev_metric", e.dev_metric}});
  }
  j["chosen_epoch"] = result.best_epoch;
  j["best_dev_metric"] = result.best_dev_metric;
  j["test_accuracy"] = result.test_accuracy;
  j["test_metric"] = result.test_metric;
  j["mix_weights"] = result.model.mix_weights();
  return j.dump(2) + "\n";
}

}  // namespace swprobe
