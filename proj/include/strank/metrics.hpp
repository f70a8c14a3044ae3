#pragma once

#include <string>
#include <vector>

#include "strank/corpus.hpp"

namespace strank {

enum class GainMode { kLinear, kExponential };

GainMode gain_mode_from_string(const std::string& name);
std::string to_string(GainMode gain);

struct MetricConfig {
  int ndcg_k = 10;
  int map_k = 100;
  GainMode gain = GainMode::kLinear;
  int map_binarize_threshold = 1;
};

// DCG over the top min(k, n) entries with gain r (linear) or 2^r-1
// (exponential) and log2(i+1) discount, normalized by the ideal DCG over all
// judged documents for the query. Returns 0 when the ideal is 0.
double ndcg_at_k(const RankedList& ranked, const QrelsTable& qrels, int k,
                 GainMode gain = GainMode::kLinear);

// Average precision at k with binary relevance grade >= threshold; R counts
// every judged relevant document for the query. Returns 0 when R is 0.
double map_at_k(const RankedList& ranked, const QrelsTable& qrels, int k,
                int threshold = 1);

struct QueryMetrics {
  std::string query_id;
  double ndcg = 0.0;
  double map = 0.0;
};

struct EvalReport {
  std::vector<QueryMetrics> per_query;
  double mean_ndcg = 0.0;
  double mean_map = 0.0;
  std::vector<std::string> skipped;  // run queries with no judgments
  int ndcg_k = 10;
  int map_k = 100;
};

// Per-query metrics plus unweighted means over evaluated queries. Queries
// absent from the qrels are skipped with a warning; throws EmptyIntersection
// when nothing is evaluable.
EvalReport evaluate_run(const std::vector<RankedList>& run, const QrelsTable& qrels,
                        const MetricConfig& cfg);

std::string format_report_table(const EvalReport& report);
void write_per_query_tsv(const EvalReport& report, const std::string& path);

}  // namespace strank
