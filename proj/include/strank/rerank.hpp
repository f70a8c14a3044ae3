#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "strank/corpus.hpp"
#include "strank/remote.hpp"
#include "strank/retrieval.hpp"
#include "strank/summarize.hpp"

namespace strank {

struct WindowPlan {
  int window = 20;
  int step = 10;

  void validate() const;  // 1 <= step <= window
};

struct ParsedPermutation {
  std::vector<int> order;  // permutation of 1..window_len
  int repair_count = 0;
};

// Extracts bracketed ids in order, then repairs: out-of-range ids dropped,
// repeats keep the first occurrence, missing ids appended in window order.
// Every input, including garbage, yields a valid permutation.
ParsedPermutation parse_permutation(std::string_view raw, int window_len);

// Same repair rules applied to an already-extracted ordering.
ParsedPermutation repair_ordering(const std::vector<int>& candidate, int window_len);

// "[5] > [1] > [3]" form; parse_permutation is the inverse.
std::string render_permutation(const std::vector<int>& order);

struct WindowItem {
  std::string doc_id;
  std::string text;
  bool is_safeguard = false;
};

class RerankerBackend {
public:
  virtual ~RerankerBackend() = default;
  virtual std::string name() const = 0;
  // 1-based ordering over the window, most relevant first. May reference
  // only indices that exist in the window; callers repair anything else.
  virtual std::vector<int> order_window(const Query& query,
                                        const std::vector<WindowItem>& items) = 0;
};

// Stable descending sort by qrels grade. Upper bound / debugging backend.
class OracleQrelsBackend : public RerankerBackend {
public:
  explicit OracleQrelsBackend(const QrelsTable& qrels) : qrels_(&qrels) {}
  std::string name() const override { return "oracle"; }
  std::vector<int> order_window(const Query& query,
                                const std::vector<WindowItem>& items) override;

private:
  const QrelsTable* qrels_;
};

// Stable descending sort by idf-weighted coverage of the query's terms;
// safeguard summaries are forced last regardless of overlap.
class LexicalOverlapBackend : public RerankerBackend {
public:
  explicit LexicalOverlapBackend(IdfWeights idf = IdfWeights::uniform())
      : idf_(std::move(idf)) {}
  std::string name() const override { return "lexical"; }
  std::vector<int> order_window(const Query& query,
                                const std::vector<WindowItem>& items) override;

private:
  IdfWeights idf_;
};

// LLM endpoint; candidates are presented as "[i] <text>" lines and the reply
// is parsed and repaired into a permutation.
class RemoteRerankBackend : public RerankerBackend {
public:
  explicit RemoteRerankBackend(RemoteConfig cfg,
                               PromptTemplate tpl = default_rerank_template());
  std::string name() const override { return "remote"; }
  std::vector<int> order_window(const Query& query,
                                const std::vector<WindowItem>& items) override;
  std::uint64_t total_repairs() const { return repairs_.load(); }

private:
  ChatClient client_;
  PromptTemplate tpl_;
  std::atomic<std::uint64_t> repairs_{0};
};

// Invokes the backend once and repairs its ordering into a permutation.
std::vector<int> rerank_window(RerankerBackend& backend, const Query& query,
                               const std::vector<WindowItem>& items);

// Back-to-front sliding windows: the last window covers [n-w, n), each next
// one shifts toward the front by `step`, and the final window starts at 0.
// Each window reorders its slice in place before the next window is taken.
// Output ranks are 1..n with synthetic descending scores n..1.
RankedList sliding_window_rerank(RerankerBackend& backend, const Query& query,
                                 std::vector<WindowItem> items, const WindowPlan& plan);

// Per-query window item assembly from a run and its summaries. Missing
// summaries fall back to the document's FirstP-128 text.
std::vector<WindowItem> window_items_for_query(const RankedList& list,
                                               const SummaryStore& summaries,
                                               const std::vector<Document>& corpus,
                                               const std::unordered_map<std::string, std::size_t>& by_id);

// Reranks every list of a run; lists are independent and processed with at
// most `parallelism` threads, output order matching the input run.
std::vector<RankedList> rerank_run(RerankerBackend& backend,
                                   const std::vector<Query>& queries,
                                   const std::vector<RankedList>& run,
                                   const std::vector<std::vector<WindowItem>>& items,
                                   const WindowPlan& plan, int parallelism = 1);

}  // namespace strank
