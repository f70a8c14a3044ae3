#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strank/corpus.hpp"
#include "strank/policy.hpp"
#include "strank/remote.hpp"

namespace strank {

// Mandated refusal output for irrelevant documents; its presence defines the
// safeguard indicator used by the reward.
inline constexpr std::string_view kSafeguardPhrase = "No relevant information found.";

// True iff the normalized text (lowercased, trimmed, internal whitespace
// collapsed) contains the safeguard phrase.
bool detect_safeguard(std::string_view text);

// Template with {query} and {document} placeholders, each exactly once.
struct PromptTemplate {
  std::string text;
  std::string version;

  static PromptTemplate parse(std::string text, std::string version);
  static PromptTemplate load_file(const std::string& path);
};

// Substitutes both placeholders in a single pass over the template; brace
// sequences inside the substituted values are left untouched.
std::string render_prompt(const PromptTemplate& tpl, const Query& query,
                          std::string_view doc_text);

PromptTemplate default_summarize_template();
PromptTemplate default_rerank_template();
std::string summarize_system_line();
std::string rerank_system_line();

struct Summary {
  std::string doc_id;
  std::string query_id;
  std::string text;  // non-empty
  bool is_safeguard = false;
  std::string backend;
};

class SummarizerBackend {
public:
  virtual ~SummarizerBackend() = default;
  virtual std::string name() const = 0;
  // Raw summary text; may throw BackendUnavailable.
  virtual std::string summarize(const Query& query, const Document& doc) = 0;
};

class FirstPSummarizer : public SummarizerBackend {
public:
  explicit FirstPSummarizer(std::size_t k = 128) : k_(k) {}
  std::string name() const override { return "firstp-" + std::to_string(k_); }
  std::string summarize(const Query& query, const Document& doc) override;

private:
  std::size_t k_;
};

// Greedy decoding from the trainable extractive policy. A decode that keeps
// no sentence degrades to the safeguard phrase.
class ToySummarizer : public SummarizerBackend {
public:
  ToySummarizer(PolicyParams params, IdfWeights idf, int budget = kDefaultSentenceBudget)
      : params_(std::move(params)), idf_(std::move(idf)), budget_(budget) {}
  std::string name() const override { return "toy-policy"; }
  std::string summarize(const Query& query, const Document& doc) override;
  const PolicyParams& params() const { return params_; }

private:
  PolicyParams params_;
  IdfWeights idf_;
  int budget_;
};

class RemoteSummarizer : public SummarizerBackend {
public:
  explicit RemoteSummarizer(RemoteConfig cfg,
                            PromptTemplate tpl = default_summarize_template());
  std::string name() const override { return "remote"; }
  std::string summarize(const Query& query, const Document& doc) override;
  const ChatClient& client() const { return client_; }

private:
  ChatClient client_;
  PromptTemplate tpl_;
};

// One summary per document, in document order. Backend failures (and empty
// outputs) fall back to FirstP-128 with a diagnostic so the list keeps its
// cardinality; a still-empty text degrades to the safeguard phrase.
// Documents are processed with at most `parallelism` in flight.
std::vector<Summary> summarize_pointwise(SummarizerBackend& backend, const Query& query,
                                         const std::vector<Document>& docs,
                                         int parallelism = 8);

void write_summaries(const std::vector<Summary>& summaries, const std::string& path);
void append_summaries(const std::vector<Summary>& summaries, const std::string& path);
std::vector<Summary> read_summaries(const std::string& path);

// Lookup keyed by (query_id, doc_id).
class SummaryStore {
public:
  explicit SummaryStore(std::vector<Summary> summaries);
  const Summary* find(const std::string& query_id, const std::string& doc_id) const;
  std::size_t size() const { return summaries_.size(); }

private:
  std::vector<Summary> summaries_;
  std::unordered_map<std::string, std::size_t> by_key_;
};

}  // namespace strank
