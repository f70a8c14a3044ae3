#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strank/corpus.hpp"

namespace strank {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

struct IndexOptions {
  bool stem = false;       // light plural stripping (s-stemmer)
  bool stopwords = false;  // drop common english function words
};

// Lowercased maximal alphanumeric runs. Bytes outside ASCII are treated as
// word characters so multi-byte UTF-8 sequences stay inside one token.
std::vector<std::string> tokenize(std::string_view text);

// tokenize + the index's optional stopword/stemming filters.
std::vector<std::string> analyze(std::string_view text, const IndexOptions& options);

struct Posting {
  std::uint32_t doc = 0;  // internal id
  std::uint32_t tf = 0;
};

// Immutable after build; safe for concurrent retrieval.
class InvertedIndex {
public:
  static InvertedIndex build(const std::vector<Document>& corpus,
                             const IndexOptions& options = {});
  static InvertedIndex load(const std::string& dir);
  void save(const std::string& dir) const;

  std::size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_length() const;
  std::uint32_t doc_length(std::uint32_t internal) const { return lengths_[internal]; }
  const std::string& doc_id(std::uint32_t internal) const { return doc_ids_[internal]; }
  const std::vector<Posting>* postings(const std::string& term) const;
  std::uint32_t df(const std::string& term) const;
  // Robertson idf with +1 inside the log, non-negative for every df.
  double idf(const std::string& term) const;
  const IndexOptions& options() const { return options_; }
  const std::unordered_map<std::string, std::vector<Posting>>& terms() const {
    return postings_;
  }

private:
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> lengths_;
  std::uint64_t total_length_ = 0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  IndexOptions options_;
};

// Resolved per-term idf lookup, detachable from the index that produced it.
// Uniform weights (all 1.0) are the fallback when no index is available.
struct IdfWeights {
  std::unordered_map<std::string, double> weights;
  double fallback = 1.0;

  double get(const std::string& term) const {
    auto it = weights.find(term);
    return it == weights.end() ? fallback : it->second;
  }

  static IdfWeights uniform() { return IdfWeights{}; }
  static IdfWeights from_index(const InvertedIndex& index);
  // Resolves only the given terms (compact form for persisted instances).
  static IdfWeights from_index_terms(const InvertedIndex& index,
                                     const std::vector<std::string>& terms);
};

// Per-term BM25 contribution: idf * tf*(k1+1) / (tf + k1*(1-b+b*len/avglen)).
double bm25_term_score(double tf, double idf, double doc_len, double avg_len,
                       const Bm25Params& params);

// Top-n by BM25 over the query's analyzed terms. Zero-scoring documents are
// omitted; ties broken by ascending doc id. Tag is "bm25".
RankedList retrieve_top_n(const InvertedIndex& index, const Query& query, std::size_t n,
                          const Bm25Params& params = {});

// First min(k, len) whitespace tokens of title+body joined by single spaces.
std::string first_p(const Document& doc, std::size_t k);

}  // namespace strank
