#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "strank/errors.hpp"
#include "strank/rl_data.hpp"
#include "strank/synth.hpp"

using namespace strank;

namespace {

// A corpus where the query's top-10 by BM25 are all judged negatives; the
// only positive contains no query terms, so it can never be retrieved.
struct InjectionFixture {
  std::vector<Document> corpus;
  QrelsTable qrels;
  Query query{"q", "alpha"};
  InvertedIndex index;

  InjectionFixture() {
    for (int i = 0; i < 12; ++i) {
      std::string id = "neg" + std::to_string(i);
      std::string body = "alpha filler" + std::to_string(i);
      for (int j = 0; j < i; ++j) body += " pad" + std::to_string(j);  // length spread
      corpus.push_back({id, "", body});
      qrels.set("q", id, 0);
    }
    corpus.push_back({"pos0", "", "completely unrelated words only"});
    qrels.set("q", "pos0", 1);
    index = InvertedIndex::build(corpus);
  }

  RlInstance build(const RlDataConfig& cfg) const {
    return build_candidate_list(query, index, qrels, corpus, doc_index_by_id(corpus),
                                cfg);
  }
};

}  // namespace

TEST_CASE("mixed retrieval is used directly") {
  SynthConfig synth_cfg;
  synth_cfg.num_queries = 3;
  SynthDataset data = make_synth_dataset(synth_cfg);
  InvertedIndex index = InvertedIndex::build(data.corpus);
  RlDataConfig cfg;
  auto by_id = doc_index_by_id(data.corpus);
  RlInstance inst =
      build_candidate_list(data.queries[0], index, data.qrels, data.corpus, by_id, cfg);
  CHECK(inst.injected_count == 0);
  CHECK(inst.candidates.size() == 10);
  CHECK(inst.has_label(CandidateLabel::kPositive));
  CHECK(inst.has_label(CandidateLabel::kNegative));
}

TEST_CASE("missing label triggers injection of k sampled docs") {
  InjectionFixture fix;
  RlDataConfig cfg;
  RlInstance inst = fix.build(cfg);
  CHECK(inst.injected_count == 1);
  CHECK(inst.candidates.size() == 10);
  int positives = 0;
  for (const Candidate& c : inst.candidates)
    if (c.label == CandidateLabel::kPositive) ++positives;
  CHECK(positives == 1);
}

TEST_CASE("injection removes exactly the k lowest-ranked retrieved docs") {
  InjectionFixture fix;
  RlDataConfig cfg;
  RlInstance inst = fix.build(cfg);
  RankedList retrieved = retrieve_top_n(fix.index, fix.query, 10);
  REQUIRE(retrieved.entries.size() == 10);
  std::set<std::string> expected;
  for (std::size_t i = 0; i + 1 < retrieved.entries.size(); ++i)
    expected.insert(retrieved.entries[i].doc_id);  // survivors: top 9
  expected.insert("pos0");
  std::set<std::string> got;
  for (const Candidate& c : inst.candidates) got.insert(c.doc_id);
  CHECK(got == expected);
  CHECK(got.count(retrieved.entries.back().doc_id) == 0);  // the removed one
}

TEST_CASE("same seed reproduces the same list and shuffle order") {
  InjectionFixture fix;
  RlDataConfig cfg;
  cfg.seed = 123;
  RlInstance a = fix.build(cfg);
  RlInstance b = fix.build(cfg);
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i)
    CHECK(a.candidates[i].doc_id == b.candidates[i].doc_id);
  cfg.seed = 124;
  RlInstance c = fix.build(cfg);
  bool same_order = true;
  for (std::size_t i = 0; i < a.candidates.size(); ++i)
    if (a.candidates[i].doc_id != c.candidates[i].doc_id) same_order = false;
  CHECK_FALSE(same_order);  // different seed shuffles differently
}

TEST_CASE("short retrieval pads from the judged pools") {
  std::vector<Document> corpus;
  QrelsTable qrels;
  // Only 3 docs score for the query; 9 more judged docs are retrievable only
  // via padding.
  for (int i = 0; i < 3; ++i) {
    corpus.push_back({"hit" + std::to_string(i), "", "alpha beta text"});
    qrels.set("q", "hit" + std::to_string(i), i == 0 ? 1 : 0);
  }
  for (int i = 0; i < 9; ++i) {
    corpus.push_back({"pad" + std::to_string(i), "", "unrelated filler body"});
    qrels.set("q", "pad" + std::to_string(i), i < 2 ? 1 : 0);
  }
  InvertedIndex index = InvertedIndex::build(corpus);
  RlDataConfig cfg;
  RlInstance inst = build_candidate_list(Query{"q", "alpha"}, index, qrels, corpus,
                                         doc_index_by_id(corpus), cfg);
  CHECK(inst.candidates.size() == 10);
  CHECK(inst.injected_count == 7);
  CHECK(inst.has_label(CandidateLabel::kPositive));
  CHECK(inst.has_label(CandidateLabel::kNegative));
}

TEST_CASE("queries without both judged labels are rejected") {
  std::vector<Document> corpus = {{"d0", "", "alpha"}, {"d1", "", "alpha two"}};
  QrelsTable qrels;
  qrels.set("q", "d0", 1);  // no judged negative anywhere
  InvertedIndex index = InvertedIndex::build(corpus);
  RlDataConfig cfg;
  CHECK_THROWS_AS(build_candidate_list(Query{"q", "alpha"}, index, qrels, corpus,
                                       doc_index_by_id(corpus), cfg),
                  InsufficientJudgments);
}

TEST_CASE("build_rl_dataset skips bad queries and keeps composition") {
  SynthConfig synth_cfg;
  synth_cfg.num_queries = 8;
  SynthDataset data = make_synth_dataset(synth_cfg);
  InvertedIndex index = InvertedIndex::build(data.corpus);
  std::vector<Query> queries = data.queries;
  queries.push_back(Query{"ghost", "zzzz"});  // no judgments at all
  RlDataConfig cfg;
  auto instances = build_rl_dataset(queries, index, data.qrels, data.corpus, cfg);
  CHECK(instances.size() == 8);
  for (const RlInstance& inst : instances) {
    CHECK(inst.candidates.size() == 10);
    CHECK(inst.has_label(CandidateLabel::kPositive));
    CHECK(inst.has_label(CandidateLabel::kNegative));
    std::set<std::string> ids;
    for (const Candidate& c : inst.candidates) ids.insert(c.doc_id);
    CHECK(ids.size() == inst.candidates.size());
  }
}

TEST_CASE("labels agree with the qrels threshold") {
  SynthConfig synth_cfg;
  synth_cfg.num_queries = 3;
  SynthDataset data = make_synth_dataset(synth_cfg);
  InvertedIndex index = InvertedIndex::build(data.corpus);
  RlDataConfig cfg;
  cfg.positive_threshold = 2;
  auto instances = build_rl_dataset(data.queries, index, data.qrels, data.corpus, cfg);
  for (const RlInstance& inst : instances)
    for (const Candidate& c : inst.candidates) {
      bool positive = data.qrels.grade(inst.query.query_id, c.doc_id) >= 2;
      CHECK((c.label == CandidateLabel::kPositive) == positive);
    }
}

TEST_CASE("background summaries align with candidates and rebuild identically") {
  SynthConfig synth_cfg;
  synth_cfg.num_queries = 2;
  SynthDataset data = make_synth_dataset(synth_cfg);
  InvertedIndex index = InvertedIndex::build(data.corpus);
  auto instances = build_rl_dataset(data.queries, index, data.qrels, data.corpus,
                                    RlDataConfig{});
  REQUIRE_FALSE(instances.empty());
  RlInstance& inst = instances.front();
  PolicyParams params = PolicyParams::zeros();
  params.include_weights = {-1.0, 8.0, 0.0, 0.0, 0.0};
  params.gate_weights = {-1.0, 8.0, 0.0};
  ToySummarizer backend(params, inst.term_idf);
  build_background_summaries(inst, backend);
  REQUIRE(inst.background.size() == inst.candidates.size());
  for (std::size_t i = 0; i < inst.background.size(); ++i) {
    CHECK(inst.background[i].doc_id == inst.candidates[i].doc_id);
    CHECK_FALSE(inst.background[i].text.empty());
    CHECK(inst.background[i].is_safeguard == detect_safeguard(inst.background[i].text));
  }
  std::vector<std::string> first_texts;
  for (const Summary& s : inst.background) first_texts.push_back(s.text);
  build_background_summaries(inst, backend);
  for (std::size_t i = 0; i < inst.background.size(); ++i)
    CHECK(inst.background[i].text == first_texts[i]);  // greedy determinism
}

TEST_CASE("rl instances round-trip through jsonl") {
  SynthConfig synth_cfg;
  synth_cfg.num_queries = 3;
  SynthDataset data = make_synth_dataset(synth_cfg);
  InvertedIndex index = InvertedIndex::build(data.corpus);
  auto instances = build_rl_dataset(data.queries, index, data.qrels, data.corpus,
                                    RlDataConfig{});
  PolicyParams params = PolicyParams::zeros();
  for (RlInstance& inst : instances) {
    ToySummarizer backend(params, inst.term_idf);
    build_background_summaries(inst, backend);
  }
  auto path = std::filesystem::temp_directory_path() / "strank-rl-data-test.jsonl";
  write_rl_instances(instances, path.string());
  auto reread = read_rl_instances(path.string());
  REQUIRE(reread.size() == instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    CHECK(reread[i].query.query_id == instances[i].query.query_id);
    CHECK(reread[i].query.text == instances[i].query.text);
    CHECK(reread[i].injected_count == instances[i].injected_count);
    CHECK(reread[i].seed == instances[i].seed);
    REQUIRE(reread[i].candidates.size() == instances[i].candidates.size());
    for (std::size_t j = 0; j < instances[i].candidates.size(); ++j) {
      CHECK(reread[i].candidates[j].doc_id == instances[i].candidates[j].doc_id);
      CHECK(reread[i].candidates[j].label == instances[i].candidates[j].label);
      CHECK(reread[i].candidates[j].grade == instances[i].candidates[j].grade);
      CHECK(reread[i].candidates[j].body == instances[i].candidates[j].body);
    }
    REQUIRE(reread[i].background.size() == instances[i].background.size());
    for (std::size_t j = 0; j < instances[i].background.size(); ++j) {
      CHECK(reread[i].background[j].text == instances[i].background[j].text);
      CHECK(reread[i].background[j].is_safeguard ==
            instances[i].background[j].is_safeguard);
    }
    CHECK(reread[i].term_idf.weights == instances[i].term_idf.weights);
  }
  std::filesystem::remove(path);
}

TEST_CASE("synthetic dataset satisfies its own contract") {
  SynthDataset data = make_synth_dataset(SynthConfig{});
  CHECK(data.queries.size() == 60);
  CHECK(data.heldout_queries.size() == 12);
  CHECK(data.train_queries.size() == 48);
  CHECK(data.corpus.size() == 60 * 15);
  for (const Query& q : data.queries) {
    const auto* judged = data.qrels.judged(q.query_id);
    REQUIRE(judged != nullptr);
    CHECK(judged->size() >= 10);
    int positives = 0;
    for (const auto& [doc, grade] : *judged)
      if (grade >= 1) ++positives;
    CHECK(positives == 5);
  }
  // Documents are 10-40 sentences.
  for (std::size_t i = 0; i < 50; ++i) {
    auto sentences = sentence_split(data.corpus[i].body);
    CHECK(sentences.size() >= 9);  // merges may reduce the count slightly
    CHECK(sentences.size() <= 40);
  }
  // Determinism.
  SynthDataset again = make_synth_dataset(SynthConfig{});
  CHECK(again.corpus[7].body == data.corpus[7].body);
  CHECK(again.queries[11].text == data.queries[11].text);
}
