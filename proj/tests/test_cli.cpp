#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"
#include "swprobe/embedding_store.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("swprobe_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Sandbox() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  fs::path operator/(const std::string& name) const { return dir / name; }

  Run run(const std::string& args) const {
    const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + SWPROBE_CLI + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                            e.string() + "\"";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(o), slurp(e)};
  }
};

std::string conllu(std::size_t sentences, std::size_t offset) {
  static const char* tags[] = {"NOUN", "VERB", "ADJ"};
  std::string s;
  for (std::size_t i = 0; i < sentences; ++i) {
    for (std::size_t w = 0; w < 2 + (i + offset) % 3; ++w) {
      s += std::to_string(w + 1) + "\tszó" + std::to_string(w) + "\t_\t" + tags[(i + w + offset) % 3] +
           "\t_\t_\t0\troot\t_\t_\n";
    }
    s += "\n";
  }
  return s;
}

// Word counts for train(12) + dev(4) + test(4) sentences built by conllu().
std::vector<std::size_t> tagging_counts() {
  std::vector<std::size_t> c;
  for (std::size_t i = 0; i < 12; ++i) c.push_back(2 + i % 3);
  for (std::size_t i = 0; i < 4; ++i) c.push_back(2 + (i + 12) % 3);
  for (std::size_t i = 0; i < 4; ++i) c.push_back(2 + (i + 16) % 3);
  return c;
}

void write_store_file(const fs::path& p, std::uint32_t layers, std::uint64_t seed) {
  fixture::Engine e(seed);
  std::normal_distribution<float> g;
  auto st = fixture::make_store(tagging_counts(), layers, 4, e, [&](auto, int, auto, auto, float* row) {
    for (int h = 0; h < 4; ++h) row[h] = g(e);
  });
  st.header.model_name = "m" + std::to_string(seed);
  std::ofstream out(p, std::ios::binary);
  swprobe::write_store(out, st.header, st.records);
}

void write_tagging_inputs(const Sandbox& sb) {
  spit(sb / "train.conllu", conllu(12, 0));
  spit(sb / "dev.conllu", conllu(4, 12));
  spit(sb / "test.conllu", conllu(4, 16));
  write_store_file(sb / "a.embs", 13, 1);
  write_store_file(sb / "b.embs", 13, 2);
}

std::string sweep_args(const Sandbox& sb, const std::string& out) {
  return "sweep --task pos --train " + (sb / "train.conllu").string() + " --dev " + (sb / "dev.conllu").string() +
         " --test " + (sb / "test.conllu").string() + " --store A=" + (sb / "a.embs").string() + " --store B=" +
         (sb / "b.embs").string() + " --seed 3 --max-epochs 3 --out " + (sb / out).string();
}

std::size_t lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("cli: tokstats over segmented files") {
  Sandbox sb;
  spit(sb / "seg.tsv", "házban\t3\tház ##ban\nkutya\t2\tkutya\nxyz\t1\t[UNK]\n");
  spit(sb / "gold.tsv", "házban\tház ban\nkutya\tkutya\nxyz\txyz\n");
  auto r = sb.run("tokstats --segmented toy=" + (sb / "seg.tsv").string() + " --gold " + (sb / "gold.tsv").string() +
                  " --out " + (sb / "ts").string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(r.out.find("Entropy of first WP") != std::string::npos);
  CHECK(fs::exists(sb / "ts" / "tokstats.json"));
  CHECK(fs::exists(sb / "ts" / "profile_toy.csv"));
  auto manifest = nlohmann::json::parse(slurp(sb / "ts" / "run_manifest.json"));
  CHECK(manifest["workflow"] == "tokstats");
  CHECK(manifest.contains("config_sha256"));
}

TEST_CASE("cli: sweep over two stores, idempotent reruns") {
  Sandbox sb;
  write_tagging_inputs(sb);
  auto r = sb.run(sweep_args(sb, "sw"));
  REQUIRE_MESSAGE(r.status == 0, r.err);
  const std::string csv = slurp(sb / "sw" / "sweep.csv");
  CHECK(lines(csv) == 1 + 16);
  const std::string json = slurp(sb / "sw" / "sweep.json");
  const std::string manifest = slurp(sb / "sw" / "run_manifest.json");

  r = sb.run(sweep_args(sb, "sw"));
  REQUIRE(r.status == 0);
  CHECK(slurp(sb / "sw" / "sweep.csv") == csv);
  CHECK(slurp(sb / "sw" / "sweep.json") == json);
  CHECK(slurp(sb / "sw" / "run_manifest.json") == manifest);

  r = sb.run("--jobs 3 " + sweep_args(sb, "sw"));
  REQUIRE(r.status == 0);
  CHECK(slurp(sb / "sw" / "sweep.csv") == csv);
  CHECK(slurp(sb / "sw" / "run_manifest.json") == manifest);

  r = sb.run("report --in " + (sb / "sw" / "sweep.json").string() + " --out " + (sb / "rep").string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(sb / "rep" / "report.csv"));
}

TEST_CASE("cli: failures leave no artifacts") {
  Sandbox sb;
  write_tagging_inputs(sb);
  auto r = sb.run("sweep --task pos --train " + (sb / "nope.conllu").string() + " --dev " +
                  (sb / "dev.conllu").string() + " --test " + (sb / "test.conllu").string() + " --store A=" +
                  (sb / "a.embs").string() + " --seed 1 --out " + (sb / "bad").string());
  CHECK(r.status == 2);
  auto err = nlohmann::json::parse(r.err);
  CHECK(err["error"]["kind"] == "config");
  CHECK(err["error"]["message"].get<std::string>().find("nope.conllu") != std::string::npos);
  CHECK_FALSE(fs::exists(sb / "bad"));

  // A store missing sentences fails during training, still before any write.
  write_store_file(sb / "short.embs", 13, 3);
  {
    std::ifstream in(sb / "short.embs", std::ios::binary);
    auto st = swprobe::read_store(in);
    st.records.pop_back();
    st.header.sentence_count = st.records.size();
    std::ofstream out(sb / "short.embs", std::ios::binary);
    swprobe::write_store(out, st.header, st.records);
  }
  r = sb.run("tag train --task pos --train " + (sb / "train.conllu").string() + " --dev " +
             (sb / "dev.conllu").string() + " --test " + (sb / "test.conllu").string() + " --store " +
             (sb / "short.embs").string() + " --seed 1 --max-epochs 2 --out " + (sb / "tag.json").string());
  CHECK(r.status == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["message"].get<std::string>().find("missing") != std::string::npos);
  CHECK_FALSE(fs::exists(sb / "tag.json"));
  CHECK_FALSE(fs::exists(sb / "tag.json.manifest.json"));

  r = sb.run("genprobe --task Case:NOUN --out x");
  CHECK(r.status == 2);
  CHECK(nlohmann::json::parse(r.err)["error"]["kind"] == "usage");
}

TEST_CASE("cli: options from a config file") {
  Sandbox sb;
  write_tagging_inputs(sb);
  spit(sb / "run.toml", "[tag.train]\ntask = \"pos\"\ntrain = \"" + (sb / "train.conllu").string() + "\"\ndev = \"" +
                            (sb / "dev.conllu").string() + "\"\ntest = \"" + (sb / "test.conllu").string() +
                            "\"\nstore = \"" + (sb / "a.embs").string() + "\"\nlayer = \"middle\"\nseed = 5\n" +
                            "max-epochs = 2\n");
  auto r = sb.run("--config " + (sb / "run.toml").string() + " tag train --out " + (sb / "cfg.json").string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  auto flags = sb.run("tag train --task pos --train " + (sb / "train.conllu").string() + " --dev " +
                      (sb / "dev.conllu").string() + " --test " + (sb / "test.conllu").string() + " --store " +
                      (sb / "a.embs").string() + " --layer middle --seed 5 --max-epochs 2 --out " +
                      (sb / "flags.json").string());
  REQUIRE(flags.status == 0);
  CHECK(slurp(sb / "cfg.json") == slurp(sb / "flags.json"));
  auto run = nlohmann::json::parse(slurp(sb / "cfg.json"));
  CHECK(run["layer"] == "6");
  CHECK(run["history"].size() <= 2);
}

TEST_CASE("cli: extract-check") {
  Sandbox sb;
  write_store_file(sb / "a.embs", 13, 1);
  std::string sentences;
  for (auto n : tagging_counts()) {
    for (std::size_t w = 0; w < n; ++w) sentences += (w ? " x" : "x");
    sentences += "\n";
  }
  spit(sb / "sent.txt", sentences);
  auto r = sb.run("extract-check --store " + (sb / "a.embs").string() + " --sentences " + (sb / "sent.txt").string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["status"] == "ok");
  CHECK(j["num_layers_total"] == 13);
  CHECK(j["sentences"] == 20);

  spit(sb / "sent.txt", "x\n" + sentences.substr(sentences.find('\n') + 1));
  r = sb.run("extract-check --store " + (sb / "a.embs").string() + " --sentences " + (sb / "sent.txt").string());
  CHECK(r.status == 1);

  std::string bytes = slurp(sb / "a.embs");
  spit(sb / "cut.embs", bytes.substr(0, bytes.size() - 3));
  r = sb.run("extract-check --store " + (sb / "cut.embs").string());
  CHECK(r.status == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["message"].get<std::string>().find("offset") != std::string::npos);
}
