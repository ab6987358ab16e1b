#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "swprobe/error.hpp"
#include "swprobe/workflow.hpp"

namespace wf = swprobe::workflow;
namespace fs = std::filesystem;

namespace {

void add_trainer_flags(CLI::App* sub, swprobe::TrainerConfig& t) {
  sub->add_option("--seed", t.seed, "global seed")->required();
  sub->add_option("--lr", t.lr)->capture_default_str();
  sub->add_option("--dropout", t.dropout)->capture_default_str();
  sub->add_option("--batch", t.batch_size)->capture_default_str();
  sub->add_option("--max-epochs", t.max_epochs)->capture_default_str();
  sub->add_option("--patience", t.patience)->capture_default_str();
}

// Every option of the invoked subcommand chain, for the manifest hash.
std::vector<std::pair<std::string, std::string>> collect_config(const CLI::App* app) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string prefix;
  for (const CLI::App* cur = app; cur;) {
    for (const CLI::Option* opt : cur->get_options()) {
      const std::string name = opt->get_name(false, true);
      if (name == "--help" || name == "--config" || name == "--jobs" || name.empty()) continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = opt->get_default_str();
      }
      out.emplace_back(prefix + name, value);
    }
    auto subs = cur->get_subcommands();
    if (subs.empty()) break;
    prefix += subs.front()->get_name() + ".";
    cur = subs.front();
  }
  return out;
}

void report_error(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

std::vector<std::pair<std::string, fs::path>> named_paths(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& s : items) out.push_back(wf::parse_named_path(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swprobe: subword tokenizer statistics and embedding probes"};
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
  app.require_subcommand(1);
  std::size_t jobs = 1;
  app.add_option("--jobs", jobs, "parallel jobs for sweeps")->capture_default_str();

  std::function<wf::Outcome()> action;
  fs::path manifest;
  std::vector<fs::path> inputs;
  std::string workflow;

  wf::TokenizeOptions tok;
  auto* c_tok = app.add_subcommand("tokenize", "segment a whitespace-tokenized corpus");
  c_tok->add_option("--vocab", tok.vocab)->required();
  c_tok->add_option("--input", tok.input)->required();
  c_tok->add_option("--out", tok.out)->required();
  c_tok->add_option("--segmented-out", tok.segmented_out, "aggregated word<TAB>freq<TAB>pieces file");
  c_tok->add_option("--prefix", tok.prefix)->capture_default_str();
  c_tok->add_option("--unk", tok.unk)->capture_default_str();
  c_tok->callback([&] {
    workflow = "tokenize";
    inputs = {tok.vocab, tok.input};
    manifest = tok.out.string() + ".manifest.json";
    action = [&] { return wf::tokenize(tok); };
  });

  wf::TrainVocabOptions tv;
  auto* c_tv = app.add_subcommand("train-vocab", "train a WordPiece-form vocabulary by pair merging");
  c_tv->add_option("--input", tv.input)->required();
  c_tv->add_option("--size", tv.size)->required();
  c_tv->add_option("--out", tv.out)->required();
  c_tv->add_option("--prefix", tv.prefix)->capture_default_str();
  c_tv->callback([&] {
    workflow = "train-vocab";
    inputs = {tv.input};
    manifest = tv.out.string() + ".manifest.json";
    action = [&] { return wf::train_vocab(tv); };
  });

  wf::TokstatsOptions ts;
  std::vector<std::string> ts_segmented, ts_vocabs;
  auto* c_ts = app.add_subcommand("tokstats", "segmentation statistics table");
  c_ts->add_option("--segmented", ts_segmented, "NAME=PATH of word<TAB>freq<TAB>pieces files");
  c_ts->add_option("--vocab", ts_vocabs, "NAME=PATH of vocabularies applied to --corpus");
  c_ts->add_option("--corpus", ts.corpus);
  c_ts->add_option("--gold", ts.gold, "word<TAB>morphemes file");
  c_ts->add_option("--buckets", ts.buckets)->capture_default_str();
  c_ts->add_option("--prefix", ts.prefix)->capture_default_str();
  c_ts->add_option("--unk", ts.unk)->capture_default_str();
  c_ts->add_option("--out", ts.out)->required();
  c_ts->callback([&] {
    workflow = "tokstats";
    ts.segmented = named_paths(ts_segmented);
    ts.vocabs = named_paths(ts_vocabs);
    inputs = {ts.corpus, ts.gold};
    for (auto& [n, p] : ts.segmented) inputs.push_back(p);
    for (auto& [n, p] : ts.vocabs) inputs.push_back(p);
    manifest = ts.out / "run_manifest.json";
    action = [&] { return wf::tokstats(ts); };
  });

  wf::GenprobeOptions gp;
  auto* c_gp = app.add_subcommand("genprobe", "generate a balanced morphological probing dataset");
  c_gp->add_option("--conllu", gp.conllu)->required();
  c_gp->add_option("--task", gp.task, "FEATURE:UPOS, e.g. Case:NOUN")->required();
  c_gp->add_option("--train", gp.train)->capture_default_str();
  c_gp->add_option("--dev", gp.dev)->capture_default_str();
  c_gp->add_option("--test", gp.test)->capture_default_str();
  c_gp->add_option("--cap", gp.cap, "max/min class ratio per split")->capture_default_str();
  c_gp->add_option("--seed", gp.seed)->required();
  c_gp->add_option("--out", gp.out)->required();
  c_gp->callback([&] {
    workflow = "genprobe";
    inputs = {gp.conllu};
    manifest = gp.out / "run_manifest.json";
    action = [&] { return wf::genprobe(gp); };
  });

  wf::ExtractCheckOptions ec;
  auto* c_ec = app.add_subcommand("extract-check", "validate an embedding store");
  c_ec->add_option("--store", ec.store)->required();
  c_ec->add_option("--sentences", ec.sentences, "sentence file the store was extracted from");
  c_ec->callback([&] {
    workflow = "extract-check";
    action = [&] { return wf::extract_check(ec); };
  });

  wf::ProbeTrainOptions pt;
  auto* c_probe = app.add_subcommand("probe", "morphological probes");
  c_probe->require_subcommand(1);
  auto* c_pt = c_probe->add_subcommand("train", "train one probe");
  c_pt->add_option("--data", pt.data, "genprobe output directory")->required();
  c_pt->add_option("--store", pt.store)->required();
  c_pt->add_option("--pool", pt.pool, "first|last|max|sum")->capture_default_str();
  c_pt->add_option("--layer", pt.layer, "index, embedding|first|middle|highest, or mix")->capture_default_str();
  c_pt->add_option("--out", pt.out)->required();
  add_trainer_flags(c_pt, pt.trainer);
  c_pt->callback([&] {
    workflow = "probe train";
    inputs = {pt.data, pt.store};
    manifest = pt.out.string() + ".manifest.json";
    action = [&] { return wf::probe_train(pt); };
  });

  wf::TagTrainOptions tt;
  auto* c_tag = app.add_subcommand("tag", "token-level taggers");
  c_tag->require_subcommand(1);
  auto* c_tt = c_tag->add_subcommand("train", "train one tagger");
  c_tt->add_option("--task", tt.task, "pos|ner")->capture_default_str();
  c_tt->add_option("--train", tt.train)->required();
  c_tt->add_option("--dev", tt.dev)->required();
  c_tt->add_option("--test", tt.test)->required();
  c_tt->add_option("--store", tt.store)->required();
  c_tt->add_option("--pool", tt.pool)->capture_default_str();
  c_tt->add_option("--layer", tt.layer)->capture_default_str();
  c_tt->add_option("--out", tt.out)->required();
  add_trainer_flags(c_tt, tt.trainer);
  c_tt->callback([&] {
    workflow = "tag train";
    inputs = {tt.train, tt.dev, tt.test, tt.store};
    manifest = tt.out.string() + ".manifest.json";
    action = [&] { return wf::tag_train(tt); };
  });

  wf::SweepOptions sw;
  std::vector<std::string> sw_stores;
  auto* c_sw = app.add_subcommand("sweep", "models x layers x pooling grid");
  c_sw->add_option("--task", sw.task, "probe|pos|ner")->capture_default_str();
  c_sw->add_option("--data", sw.data);
  c_sw->add_option("--train", sw.train);
  c_sw->add_option("--dev", sw.dev);
  c_sw->add_option("--test", sw.test);
  c_sw->add_option("--store", sw_stores, "NAME=PATH, repeatable")->required();
  c_sw->add_option("--pool", sw.pools)->capture_default_str();
  c_sw->add_option("--layer", sw.layers, "kinds, 'all' or 'mix'")->capture_default_str();
  c_sw->add_flag("--mix", sw.mix, "add a scalar-mix cell");
  c_sw->add_option("--out", sw.out)->required();
  add_trainer_flags(c_sw, sw.trainer);
  c_sw->callback([&] {
    workflow = "sweep";
    sw.stores = named_paths(sw_stores);
    sw.jobs = jobs;
    inputs = {sw.data, sw.train, sw.dev, sw.test};
    for (auto& [n, p] : sw.stores) inputs.push_back(p);
    manifest = sw.out / "run_manifest.json";
    action = [&] { return wf::sweep(sw); };
  });

  wf::ReportOptions rp;
  auto* c_rp = app.add_subcommand("report", "merge sweep results into one table");
  c_rp->add_option("--in", rp.inputs, "sweep.json files")->required();
  c_rp->add_option("--out", rp.out);
  c_rp->callback([&] {
    workflow = "report";
    inputs = rp.inputs;
    if (!rp.out.empty()) manifest = rp.out / "run_manifest.json";
    action = [&] { return wf::report(rp); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  } catch (const swprobe::Error& e) {
    report_error(e.kind(), e.what());
    return 2;
  }

  try {
    const wf::Outcome outcome = action();
    if (!manifest.empty()) wf::commit(workflow, collect_config(&app), inputs, outcome, manifest);
    std::cout << outcome.summary;
    return 0;
  } catch (const swprobe::Error& e) {
    report_error(e.kind(), e.what());
    return e.kind() == "config" ? 2 : 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
}
