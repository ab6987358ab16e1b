#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "support.hpp"
#include "swprobe/conllu.hpp"
#include "swprobe/error.hpp"
#include "swprobe/probe_dataset.hpp"

using namespace swprobe;

namespace {

// One sentence per form; `per_label` lists how many distinct forms carry each label.
CandidatePool make_pool(const std::vector<std::pair<std::string, std::size_t>>& per_label) {
  CandidatePool pool;
  pool.task = parse_task("Case:NOUN");
  for (const auto& [label, n] : per_label) {
    for (std::size_t i = 0; i < n; ++i) {
      std::string form = label + "form" + std::to_string(i);
      std::vector<std::string> sent = {"the", form};
      ProbingInstance inst{pool.sentences.size(), sent, 1, label, fixture::lower_ascii(form)};
      pool.sentences.push_back(sent);
      pool.candidates.push_back(inst);
    }
    pool.task.label_set.push_back(label);
  }
  return pool;
}

std::vector<ConlluSentence> parse(const std::string& text) {
  std::istringstream in(text);
  return read_conllu(in);
}

const char* kToy =
    "# sent_id = 1\n"
    "1\tA\ta\tDET\t_\t_\t2\tdet\t_\t_\n"
    "2\tHázat\tház\tNOUN\t_\tCase=Acc|Number=Sing\t3\tobj\t_\t_\n"
    "3\tlát\tlát\tVERB\t_\tMood=Ind\t0\troot\t_\t_\n"
    "\n"
    "1-2\tkertben\t_\t_\t_\t_\t_\t_\t_\t_\n"
    "1\tkert\tkert\tNOUN\t_\tCase=Ine\t0\troot\t_\t_\n"
    "2\tben\tben\tADP\t_\t_\t1\tcase\t_\t_\n"
    "2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n"
    "\n"
    "1\tA\ta\tDET\t_\t_\t2\tdet\t_\t_\n"
    "2\tHázat\tház\tNOUN\t_\tCase=Acc|Number=Sing\t3\tobj\t_\t_\n"
    "3\tlát\tlát\tVERB\t_\tMood=Ind\t0\troot\t_\t_\n"
    "\n"
    "1\tfut\tfut\tVERB\t_\tCase=Nom\t0\troot\t_\t_\n"
    "2\tházak\tház\tNOUN\t_\tNumber=Plur\t1\tnsubj\t_\t_\n";

}  // namespace

TEST_CASE("conllu reader") {
  auto c = parse(kToy);
  REQUIRE(c.size() == 4);
  CHECK(c[0].words() == std::vector<std::string>{"A", "Házat", "lát"});
  CHECK(c[1].words() == std::vector<std::string>{"kert", "ben"});
  CHECK(c[0].tokens[1].feats.at("Case") == "Acc");
  CHECK(c[3].tokens.size() == 2);
}

TEST_CASE("conllu errors carry line numbers") {
  CHECK_THROWS_WITH_AS(parse("1\tA\ta\tDET\n"), doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(parse("1\tA\ta\tDET\t_\t_\t0\troot\t_\t_\n2\tB\tb\tX\t_\tCase\t1\tx\t_\t_\n"),
                       doctest::Contains("line 2"), Error);
}

TEST_CASE("extract_candidates on a toy corpus") {
  auto pool = extract_candidates(parse(kToy), parse_task("Case:NOUN"));
  // Sentence 3 duplicates sentence 1; the VERB with Case and the NOUN without it never count.
  REQUIRE(pool.sentences.size() == 3);
  REQUIRE(pool.candidates.size() == 2);
  CHECK(pool.candidates[0].sentence_id == 0);
  CHECK(pool.candidates[0].target_index == 1);
  CHECK(pool.candidates[0].label == "Acc");
  CHECK(pool.candidates[0].target_form == "házat");
  CHECK(pool.candidates[1].sentence_id == 1);
  CHECK(pool.candidates[1].label == "Ine");
  CHECK(pool.task.label_set == std::vector<std::string>{"Acc", "Ine"});
}

TEST_CASE("parse_task") {
  auto t = parse_task("Number[psor]:NOUN");
  CHECK(t.feature_key == "Number[psor]");
  CHECK(t.upos == "NOUN");
  CHECK_THROWS_AS(parse_task("Case"), Error);
  CHECK_THROWS_AS(parse_task(":NOUN"), Error);
}

TEST_CASE("two plentiful labels balance exactly") {
  auto pool = make_pool({{"A", 5000}, {"B", 5000}});
  auto ds = sample_splits(pool, {}, 3.0, 1);
  CHECK(fixture::check_dataset(ds, {}, 3.0).empty());
  for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
    std::size_t a = 0;
    for (const auto& i : *split) a += i.label == "A";
    CHECK(a * 2 == split->size());
  }
  CHECK(ds.dropped_labels.empty());
}

TEST_CASE("rare label is dropped") {
  auto pool = make_pool({{"A", 9000}, {"B", 200}, {"C", 9000}});
  auto ds = sample_splits(pool, {}, 3.0, 4);
  CHECK(ds.dropped_labels == std::vector<std::string>{"B"});
  CHECK(ds.task.label_set == std::vector<std::string>{"A", "C"});
  CHECK(fixture::check_dataset(ds, {}, 3.0).empty());

  auto two = make_pool({{"A", 9000}, {"B", 200}});
  CHECK_THROWS_WITH_AS(sample_splits(two, {}, 3.0, 4), doctest::Contains("ungeneratable"), Error);
}

TEST_CASE("moderately rare label is kept under the cap") {
  auto pool = make_pool({{"A", 9000}, {"B", 1500}});
  auto ds = sample_splits(pool, {}, 3.0, 4);
  CHECK(ds.dropped_labels.empty());
  CHECK(fixture::check_dataset(ds, {}, 3.0).empty());
}

TEST_CASE("shortfall is reported per split") {
  auto pool = make_pool({{"A", 100}, {"B", 100}});
  try {
    sample_splits(pool, {}, 3.0, 1);
    FAIL("expected rejection");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("train short by") != std::string::npos);
    CHECK(msg.find("test short by") != std::string::npos);
  }
  CHECK_THROWS_AS(sample_splits(CandidatePool{}, {}, 3.0, 1), Error);
}

TEST_CASE("disjointness uses lowercased forms") {
  // The same form capitalized differently must land in one split.
  CandidatePool pool = make_pool({{"A", 3000}, {"B", 3000}});
  for (std::size_t i = 0; i < 3000; ++i) {
    std::string form = "Aform" + std::to_string(i);
    form[0] = 'A';
    std::vector<std::string> sent = {"The", form, "x"};
    pool.candidates.push_back({pool.sentences.size(), sent, 1, "A", fixture::lower_ascii(form)});
    pool.sentences.push_back(sent);
  }
  auto ds = sample_splits(pool, {}, 3.0, 8);
  CHECK(fixture::check_dataset(ds, {}, 3.0).empty());
}

TEST_CASE("same seed gives identical files, different seed different membership") {
  fixture::Engine e(2);
  auto text = fixture::synthetic_conllu(e, 3000, {{"Nom", 5}, {"Acc", 3}, {"Dat", 1}, {"Ine", 0.3}});
  auto corpus = parse(text);
  auto pool = extract_candidates(corpus, parse_task("Case:NOUN"));
  SplitSizes sizes{1000, 100, 1000};
  auto a = sample_splits(pool, sizes, 3.0, 11);
  auto b = sample_splits(pool, sizes, 3.0, 11);
  auto c = sample_splits(pool, sizes, 3.0, 12);
  CHECK(dataset_files(a, pool) == dataset_files(b, pool));
  CHECK(split_to_tsv(a.train) != split_to_tsv(c.train));
  CHECK(fixture::check_dataset(a, sizes, 3.0).empty());
  CHECK(fixture::check_dataset(c, sizes, 3.0).empty());
}

TEST_CASE("property: labels with enough support are never dropped") {
  // Threshold per label and split partition: ceil(n / (3L - 2)).
  fixture::Engine e(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t L = 2 + fixture::pick(e, 5);
    SplitSizes sizes{200 + fixture::pick(e, 400), 20 + fixture::pick(e, 40), 200 + fixture::pick(e, 400)};
    // The first label gets exactly the threshold in every split partition,
    // the others a full split each.
    CandidatePool pool;
    pool.task = parse_task("F:NOUN");
    const std::uint64_t seed = e();
    for (std::size_t l = 0; l < L; ++l) {
      const std::string label = "L" + std::to_string(l);
      const bool rare = l == 0;
      std::array<std::size_t, 3> need{};
      const std::size_t want[] = {sizes.train, sizes.dev, sizes.test};
      for (int s = 0; s < 3; ++s) {
        const std::size_t thr = (want[s] + 3 * L - 3) / (3 * L - 2);
        need[s] = rare ? thr : want[s];
      }
      // Add forms until every split partition holds its quota.
      std::array<std::size_t, 3> got{};
      for (std::size_t i = 0; got[0] < need[0] || got[1] < need[1] || got[2] < need[2]; ++i) {
        std::string form = fixture::lower_ascii(label) + "x" + std::to_string(i);
        int s = split_for_form(form, sizes, seed);
        if (got[s] >= need[s]) continue;
        ++got[s];
        std::vector<std::string> sent = {form};
        pool.candidates.push_back({pool.sentences.size(), sent, 0, label, form});
        pool.sentences.push_back(sent);
      }
    }
    auto ds = sample_splits(pool, sizes, 3.0, seed);
    CHECK(ds.dropped_labels.empty());
    const auto bad = fixture::check_dataset(ds, sizes, 3.0);
    CHECK_MESSAGE(bad.empty(), bad);
  }
}

TEST_CASE("the threshold with 3L in the denominator is not sufficient") {
  // Two labels, train only: 334 = ceil(2000 / 6) forms of A cannot be
  // balanced under 3:1 against 1666 of B.
  CandidatePool pool;
  pool.task = parse_task("F:NOUN");
  SplitSizes sizes{2000, 0, 0};
  for (int l = 0; l < 2; ++l) {
    for (std::size_t i = 0; i < (l == 0 ? 334u : 5000u); ++i) {
      std::string form = std::string(l == 0 ? "a" : "b") + std::to_string(i);
      pool.candidates.push_back({pool.sentences.size(), {form}, 0, l == 0 ? "A" : "B", form});
      pool.sentences.push_back({form});
    }
  }
  CHECK_THROWS_AS(sample_splits(pool, sizes, 3.0, 0), Error);
  // ceil(2000 / 4) = 500 suffices.
  for (std::size_t i = 334; i < 500; ++i) {
    std::string form = "a" + std::to_string(i);
    pool.candidates.push_back({pool.sentences.size(), {form}, 0, "A", form});
    pool.sentences.push_back({form});
  }
  auto ds = sample_splits(pool, sizes, 3.0, 0);
  CHECK(ds.dropped_labels.empty());
  CHECK(fixture::check_dataset(ds, sizes, 3.0).empty());
}

TEST_CASE("tsv round trip and loading") {
  auto pool = make_pool({{"A", 5000}, {"B", 5000}});
  auto ds = sample_splits(pool, {}, 3.0, 3);
  std::istringstream in(split_to_tsv(ds.dev));
  auto back = read_split_tsv(in);
  REQUIRE(back.size() == ds.dev.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].sentence_id == ds.dev[i].sentence_id);
    CHECK(back[i].label == ds.dev[i].label);
    CHECK(back[i].target_form == ds.dev[i].target_form);
    CHECK(back[i].sentence == ds.dev[i].sentence);
  }
  auto dir = std::filesystem::temp_directory_path() / "swprobe_ds_test";
  std::filesystem::remove_all(dir);
  write_dataset(ds, pool, dir);
  auto loaded = load_dataset(dir);
  CHECK(loaded.train.size() == 2000);
  CHECK(loaded.label_set == std::vector<std::string>{"A", "B"});
  std::filesystem::remove_all(dir);

  std::istringstream bad("1\t5\tA\tx y\n");
  CHECK_THROWS_AS(read_split_tsv(bad), Error);
}
