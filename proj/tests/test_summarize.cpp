#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "strank/errors.hpp"
#include "strank/summarize.hpp"

using namespace strank;

TEST_CASE("render_prompt substitutes both placeholders") {
  PromptTemplate tpl = PromptTemplate::parse("Q:{query} D:{document}", "t1");
  CHECK(render_prompt(tpl, Query{"q", "tides"}, "text") == "Q:tides D:text");
}

TEST_CASE("substitution is single-pass") {
  PromptTemplate tpl = PromptTemplate::parse("Q:{query} D:{document}", "t1");
  std::string out = render_prompt(tpl, Query{"q", "tides"}, "literal {query} inside");
  CHECK(out == "Q:tides D:literal {query} inside");
  // A query value containing the document placeholder is not re-expanded.
  std::string tricky = render_prompt(tpl, Query{"q", "{document}"}, "doc");
  CHECK(tricky == "Q:{document} D:doc");
}

TEST_CASE("template validation requires each placeholder exactly once") {
  CHECK_THROWS_AS(PromptTemplate::parse("no placeholders", "t"), MissingPlaceholder);
  CHECK_THROWS_AS(PromptTemplate::parse("{query} only", "t"), MissingPlaceholder);
  CHECK_THROWS_AS(PromptTemplate::parse("{query} {query} {document}", "t"),
                  MissingPlaceholder);
}

TEST_CASE("the default summarize template keeps its rule lines") {
  PromptTemplate tpl = default_summarize_template();
  std::string out = render_prompt(tpl, Query{"q", "tide tables"}, "some document");
  CHECK(out.find("No relevant information found.") != std::string::npos);
  CHECK(out.find("Do NOT provide explanations") != std::string::npos);
  CHECK(out.find("Query: tide tables") != std::string::npos);
  CHECK(out.find("some document") != std::string::npos);
  CHECK(out.find("{query}") == std::string::npos);
  CHECK(out.find("{document}") == std::string::npos);
}

TEST_CASE("safeguard detection normalizes case, whitespace, and punctuation") {
  CHECK(detect_safeguard("No relevant information found."));
  CHECK(detect_safeguard("NO RELEVANT   INFORMATION FOUND"));
  CHECK(detect_safeguard("  no relevant\tinformation found  "));
  CHECK(detect_safeguard("Reply: No Relevant Information Found!"));
  CHECK_FALSE(detect_safeguard("The document describes tide schedules."));
  CHECK_FALSE(detect_safeguard(""));
  CHECK_FALSE(detect_safeguard("no relevant data found"));
}

TEST_CASE("firstp backend returns the prefix and never flags safeguard") {
  FirstPSummarizer backend(128);
  Document doc{"d", "", "one two three four five"};
  auto sums = summarize_pointwise(backend, Query{"q", "x"}, {doc});
  REQUIRE(sums.size() == 1);
  CHECK(sums[0].text == "one two three four five");
  CHECK_FALSE(sums[0].is_safeguard);
  CHECK(sums[0].backend == "firstp-128");
  CHECK(sums[0].doc_id == "d");
  CHECK(sums[0].query_id == "q");
}

TEST_CASE("summaries preserve cardinality and input order under parallelism") {
  FirstPSummarizer backend(4);
  std::vector<Document> docs;
  for (int i = 0; i < 37; ++i)
    docs.push_back({"d" + std::to_string(i), "", "body " + std::to_string(i)});
  auto sums = summarize_pointwise(backend, Query{"q", "x"}, docs, /*parallelism=*/8);
  REQUIRE(sums.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) CHECK(sums[i].doc_id == docs[i].doc_id);
}

TEST_CASE("empty documents degrade to the safeguard phrase") {
  FirstPSummarizer backend(16);
  auto sums = summarize_pointwise(backend, Query{"q", "x"}, {Document{"d", "", ""}});
  REQUIRE(sums.size() == 1);
  CHECK(sums[0].text == std::string(kSafeguardPhrase));
  CHECK(sums[0].is_safeguard);
}

TEST_CASE("summary files round-trip") {
  std::vector<Summary> sums = {{"d1", "q1", "text one", false, "firstp-128"},
                               {"d2", "q1", "No relevant information found.", true,
                                "toy-policy"}};
  auto path = std::filesystem::temp_directory_path() / "strank-sums-test.jsonl";
  write_summaries(sums, path.string());
  auto reread = read_summaries(path.string());
  REQUIRE(reread.size() == 2);
  CHECK(reread[0].text == "text one");
  CHECK(reread[1].is_safeguard);
  SummaryStore store(reread);
  REQUIRE(store.find("q1", "d2") != nullptr);
  CHECK(store.find("q1", "d2")->backend == "toy-policy");
  CHECK(store.find("q1", "zz") == nullptr);
  std::filesystem::remove(path);
}

namespace {

// Scripted chat-completions endpoint for client-contract tests.
class MockLlm {
public:
  MockLlm() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      ++requests;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      if (fail_first > 0) {
        --fail_first;
        res.status = 500;
        res.set_content("{}", "application/json");
        return;
      }
      nlohmann::json reply = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this]() { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockLlm() {
    server_.stop();
    thread_.join();
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

  std::string content = "mock summary text";
  std::atomic<int> requests{0};
  std::atomic<int> fail_first{0};
  std::string last_auth;
  std::string last_body;

private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteConfig test_config(const MockLlm& mock) {
  RemoteConfig cfg;
  cfg.url = mock.url();
  cfg.model = "unit-test-model";
  cfg.timeout_sec = 5;
  cfg.backoff_initial_sec = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("remote client sends the documented request shape") {
  MockLlm mock;
  ::setenv("STRANK_API_KEY", "test-key", 1);
  RemoteSummarizer backend(test_config(mock));
  auto sums = summarize_pointwise(backend, Query{"q", "tides"},
                                  {Document{"d", "", "tide tables body"}}, 1);
  REQUIRE(sums.size() == 1);
  CHECK(sums[0].text == "mock summary text");
  CHECK(sums[0].backend == "remote");
  CHECK(mock.last_auth == "Bearer test-key");
  nlohmann::json body = nlohmann::json::parse(mock.last_body);
  CHECK(body["model"] == "unit-test-model");
  CHECK(body["temperature"] == 0);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["role"] == "user");
  std::string prompt = body["messages"][1]["content"].get<std::string>();
  CHECK(prompt.find("Query: tides") != std::string::npos);
  CHECK(prompt.find("tide tables body") != std::string::npos);
  ::unsetenv("STRANK_API_KEY");
}

TEST_CASE("remote client retries with backoff and then succeeds") {
  MockLlm mock;
  mock.fail_first = 2;
  RemoteSummarizer backend(test_config(mock));
  auto sums = summarize_pointwise(backend, Query{"q", "x"},
                                  {Document{"d", "", "body"}}, 1);
  CHECK(sums[0].text == "mock summary text");
  CHECK(mock.requests == 3);
}

TEST_CASE("exhausted retries fall back to firstp-128") {
  MockLlm mock;
  mock.fail_first = 1000;
  RemoteSummarizer backend(test_config(mock));
  auto sums = summarize_pointwise(backend, Query{"q", "x"},
                                  {Document{"d", "", "prefix words here"}}, 1);
  REQUIRE(sums.size() == 1);
  CHECK(sums[0].text == "prefix words here");
  CHECK(sums[0].backend == "firstp-128-fallback");
  CHECK(mock.requests == 4);  // initial attempt + 3 retries
}

TEST_CASE("remote safeguard output sets the flag") {
  MockLlm mock;
  mock.content = "No relevant information found.";
  RemoteSummarizer backend(test_config(mock));
  auto sums = summarize_pointwise(backend, Query{"q", "x"},
                                  {Document{"d", "", "body"}}, 1);
  CHECK(sums[0].is_safeguard);
}

TEST_CASE("remote client surfaces BackendUnavailable directly") {
  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:9/v1/chat/completions";  // nothing listens here
  cfg.timeout_sec = 1;
  cfg.max_retries = 0;
  cfg.backoff_initial_sec = 0.0;
  ChatClient client(cfg);
  CHECK_THROWS_AS(client.complete("sys", "user"), BackendUnavailable);
}
