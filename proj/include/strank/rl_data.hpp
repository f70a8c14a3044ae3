#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "strank/corpus.hpp"
#include "strank/retrieval.hpp"
#include "strank/summarize.hpp"

namespace strank {

struct RlDataConfig {
  int n = 10;                  // candidate list size
  int k = 1;                   // injected docs when one label is missing
  int positive_threshold = 1;  // grade >= threshold counts as positive
  std::uint64_t seed = 7;
  Bm25Params bm25;

  void validate() const;  // k < n, n >= 2
};

enum class CandidateLabel { kPositive, kNegative };

struct Candidate {
  std::string doc_id;
  CandidateLabel label = CandidateLabel::kNegative;
  int grade = 0;
  std::string title;
  std::string body;
};

// One query's training environment: a shuffled candidate list guaranteed to
// contain both labels, plus (once built) the frozen background summaries.
struct RlInstance {
  Query query;
  std::vector<Candidate> candidates;
  std::vector<Summary> background;  // positionally aligned; empty until built
  int injected_count = 0;
  std::uint64_t seed = 0;
  IdfWeights term_idf;  // idf for the query's terms, resolved at build time

  bool has_label(CandidateLabel label) const;
  std::vector<std::size_t> indices_with_label(CandidateLabel label) const;
};

// Top-n retrieval; when one label is entirely missing the k lowest-ranked
// candidates are replaced by seeded uniform samples from the missing label's
// judged pool, then the list is shuffled. Short retrieval is padded from the
// judged pools first. Throws InsufficientJudgments when the query lacks a
// judged positive or negative present in the corpus.
RlInstance build_candidate_list(const Query& query, const InvertedIndex& index,
                                const QrelsTable& qrels,
                                const std::vector<Document>& corpus,
                                const std::unordered_map<std::string, std::size_t>& by_id,
                                const RlDataConfig& cfg);

// Summarizes each candidate once with the given (deterministic) backend.
void build_background_summaries(RlInstance& instance, SummarizerBackend& backend);

// All queries; ones failing the precondition are skipped with a diagnostic.
std::vector<RlInstance> build_rl_dataset(const std::vector<Query>& queries,
                                         const InvertedIndex& index,
                                         const QrelsTable& qrels,
                                         const std::vector<Document>& corpus,
                                         const RlDataConfig& cfg);

void write_rl_instances(const std::vector<RlInstance>& instances, const std::string& path);
std::vector<RlInstance> read_rl_instances(const std::string& path);

}  // namespace strank
