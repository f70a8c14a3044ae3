#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <thread>

#include "strank/errors.hpp"
#include "strank/retrieval.hpp"
#include "strank/rng.hpp"
#include "support/oracles.hpp"

using namespace strank;

TEST_CASE("tokenize lowercases alphanumeric runs") {
  CHECK(tokenize("Tide Tables, 2024!") ==
        std::vector<std::string>{"tide", "tables", "2024"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("re-rank") == std::vector<std::string>{"re", "rank"});
  CHECK(tokenize("a1b2 c") == std::vector<std::string>{"a1b2", "c"});
}

TEST_CASE("index counts match hand tallies") {
  std::vector<Document> corpus = {{"d1", "", "a a b"}};
  InvertedIndex index = InvertedIndex::build(corpus);
  REQUIRE(index.postings("a") != nullptr);
  CHECK((*index.postings("a"))[0].tf == 2);
  CHECK((*index.postings("b"))[0].tf == 1);
  CHECK(index.doc_length(0) == 3);
  CHECK(index.avg_doc_length() == doctest::Approx(3.0));
}

TEST_CASE("average length over two docs") {
  std::vector<Document> corpus = {{"d1", "", "x y"}, {"d2", "", "x y z w"}};
  InvertedIndex index = InvertedIndex::build(corpus);
  CHECK(index.avg_doc_length() == doctest::Approx(3.0));
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_AS(InvertedIndex::build({}), EmptyCorpus);
}

TEST_CASE("absent query terms give an empty result") {
  std::vector<Document> corpus = {{"d1", "", "alpha beta"}};
  InvertedIndex index = InvertedIndex::build(corpus);
  RankedList out = retrieve_top_n(index, Query{"q", "gamma"}, 10);
  CHECK(out.entries.empty());
}

TEST_CASE("ties break by ascending doc id") {
  std::vector<Document> corpus = {{"d2", "", "alpha x"}, {"d1", "", "alpha y"}};
  InvertedIndex index = InvertedIndex::build(corpus);
  RankedList out = retrieve_top_n(index, Query{"q", "alpha"}, 10);
  REQUIRE(out.entries.size() == 2);
  CHECK(out.entries[0].doc_id == "d1");
  CHECK(out.entries[1].doc_id == "d2");
}

TEST_CASE("3-doc toy corpus matches the brute-force scorer") {
  std::vector<Document> corpus = {
      {"d1", "", "tide tables for the bay"},
      {"d2", "tide", "tide tide charts"},
      {"d3", "", "nothing relevant here at all"},
  };
  InvertedIndex index = InvertedIndex::build(corpus);
  Bm25Params params{0.9, 0.4};
  RankedList got = retrieve_top_n(index, Query{"q", "tide tables"}, 3, params);
  auto expected = oracle::brute_force_bm25(corpus, "tide tables", 3, 0.9, 0.4);
  REQUIRE(got.entries.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(got.entries[i].doc_id == expected[i].doc_id);
    CHECK(got.entries[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
  }
}

namespace {

std::vector<Document> random_corpus(std::mt19937_64& rng, std::size_t max_docs) {
  const char* words[] = {"tide", "table", "kelp", "farm", "reef", "wave",
                         "chart", "moon", "salt", "bay"};
  std::size_t n = 1 + uniform_below(rng, max_docs);
  std::vector<Document> corpus;
  for (std::size_t d = 0; d < n; ++d) {
    std::size_t len = 1 + uniform_below(rng, 12);
    std::string body;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) body.push_back(' ');
      body += words[uniform_below(rng, 10)];
    }
    corpus.push_back({"d" + std::to_string(d), "", body});
  }
  return corpus;
}

std::string random_query(std::mt19937_64& rng) {
  const char* words[] = {"tide", "table", "kelp", "farm", "reef", "wave",
                         "chart", "moon", "salt", "bay"};
  std::size_t len = 1 + uniform_below(rng, 3);
  std::string q;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) q.push_back(' ');
    q += words[uniform_below(rng, 10)];
  }
  return q;
}

}  // namespace

TEST_CASE("retrieval equals exhaustive scoring on random corpora") {
  std::mt19937_64 rng = seeded_rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Document> corpus = random_corpus(rng, 50);
    std::string query_text = random_query(rng);
    InvertedIndex index = InvertedIndex::build(corpus);
    RankedList got = retrieve_top_n(index, Query{"q", query_text}, 10, Bm25Params{});
    auto expected = oracle::brute_force_bm25(corpus, query_text, 10, 0.9, 0.4);
    REQUIRE(got.entries.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(got.entries[i].doc_id == expected[i].doc_id);
      CHECK(got.entries[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
    }
  }
}

TEST_CASE("term score is monotone in tf with other stats fixed") {
  Bm25Params params{0.9, 0.4};
  for (double idf : {0.1, 1.0, 3.0})
    for (double len : {5.0, 50.0})
      for (int tf = 1; tf < 30; ++tf)
        CHECK(bm25_term_score(tf + 1, idf, len, 20.0, params) >=
              bm25_term_score(tf, idf, len, 20.0, params));
}

TEST_CASE("first_p truncation") {
  Document shorter{"d", "", "one two three four five"};
  CHECK(first_p(shorter, 128) == "one two three four five");
  CHECK(first_p(shorter, 1) == "one");
  std::string body;
  for (int i = 0; i < 300; ++i) body += (i ? " w" : "w") + std::to_string(i);
  Document longer{"d", "", body};
  std::string cut = first_p(longer, 256);
  auto tokens = split_whitespace(cut);
  REQUIRE(tokens.size() == 256);
  CHECK(tokens.front() == "w0");
  CHECK(tokens.back() == "w255");
}

TEST_CASE("first_p includes the title tokens first") {
  Document doc{"d", "big title", "body text"};
  CHECK(first_p(doc, 3) == "big title body");
}

TEST_CASE("index save/load round-trips retrieval results") {
  std::mt19937_64 rng = seeded_rng(7);
  std::vector<Document> corpus = random_corpus(rng, 30);
  InvertedIndex index = InvertedIndex::build(corpus);
  auto dir = std::filesystem::temp_directory_path() / "strank-index-test";
  index.save(dir.string());
  InvertedIndex loaded = InvertedIndex::load(dir.string());
  CHECK(loaded.doc_count() == index.doc_count());
  CHECK(loaded.avg_doc_length() == doctest::Approx(index.avg_doc_length()));
  for (int t = 0; t < 10; ++t) {
    std::string q = random_query(rng);
    RankedList a = retrieve_top_n(index, Query{"q", q}, 10);
    RankedList b = retrieve_top_n(loaded, Query{"q", q}, 10);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(a.entries[i].doc_id == b.entries[i].doc_id);
      CHECK(a.entries[i].score == doctest::Approx(b.entries[i].score).epsilon(1e-12));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent retrieval equals serial") {
  std::mt19937_64 rng = seeded_rng(11);
  std::vector<Document> corpus = random_corpus(rng, 40);
  InvertedIndex index = InvertedIndex::build(corpus);
  std::vector<std::string> queries;
  for (int i = 0; i < 16; ++i) queries.push_back(random_query(rng));
  std::vector<RankedList> serial;
  for (const std::string& q : queries)
    serial.push_back(retrieve_top_n(index, Query{"q", q}, 10));
  std::vector<RankedList> parallel(queries.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < queries.size(); ++i)
    pool.emplace_back([&, i]() {
      parallel[i] = retrieve_top_n(index, Query{"q", queries[i]}, 10);
    });
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    REQUIRE(parallel[i].entries.size() == serial[i].entries.size());
    for (std::size_t j = 0; j < serial[i].entries.size(); ++j)
      CHECK(parallel[i].entries[j].doc_id == serial[i].entries[j].doc_id);
  }
}

TEST_CASE("stopword and stemming options") {
  IndexOptions opts;
  opts.stopwords = true;
  opts.stem = true;
  CHECK(analyze("the tides of tables", opts) ==
        std::vector<std::string>{"tide", "table"});
  CHECK(analyze("glass classes", opts) == std::vector<std::string>{"glass", "classe"});
}
