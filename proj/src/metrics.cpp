#include "strank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "strank/errors.hpp"

namespace strank {

namespace {

double gain(int grade, GainMode mode) {
  if (mode == GainMode::kLinear) return static_cast<double>(grade);
  return std::exp2(static_cast<double>(grade)) - 1.0;
}

double discount(std::size_t rank_1based) {
  return 1.0 / std::log2(static_cast<double>(rank_1based) + 1.0);
}

}  // namespace

GainMode gain_mode_from_string(const std::string& name) {
  if (name == "linear") return GainMode::kLinear;
  if (name == "exponential") return GainMode::kExponential;
  throw ConfigError("unknown gain mode: " + name + " (expected linear|exponential)");
}

std::string to_string(GainMode mode) {
  return mode == GainMode::kLinear ? "linear" : "exponential";
}

double ndcg_at_k(const RankedList& ranked, const QrelsTable& qrels, int k, GainMode mode) {
  const std::size_t depth = std::min<std::size_t>(ranked.entries.size(),
                                                  static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i)
    dcg += gain(qrels.grade(ranked.query_id, ranked.entries[i].doc_id), mode) *
           discount(i + 1);

  const auto* judged = qrels.judged(ranked.query_id);
  if (judged == nullptr) return 0.0;
  std::vector<int> grades;
  grades.reserve(judged->size());
  for (const auto& [doc, grade] : *judged) grades.push_back(grade);
  std::sort(grades.begin(), grades.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < grades.size() && i < static_cast<std::size_t>(k); ++i)
    idcg += gain(grades[i], mode) * discount(i + 1);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double map_at_k(const RankedList& ranked, const QrelsTable& qrels, int k, int threshold) {
  const auto* judged = qrels.judged(ranked.query_id);
  if (judged == nullptr) return 0.0;
  std::size_t total_relevant = 0;
  for (const auto& [doc, grade] : *judged)
    if (grade >= threshold) ++total_relevant;
  if (total_relevant == 0) return 0.0;

  const std::size_t depth = std::min<std::size_t>(ranked.entries.size(),
                                                  static_cast<std::size_t>(k));
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (qrels.grade(ranked.query_id, ranked.entries[i].doc_id) >= threshold) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

EvalReport evaluate_run(const std::vector<RankedList>& run, const QrelsTable& qrels,
                        const MetricConfig& cfg) {
  EvalReport report;
  report.ndcg_k = cfg.ndcg_k;
  report.map_k = cfg.map_k;
  for (const RankedList& list : run) {
    if (!qrels.has_query(list.query_id)) {
      std::cerr << "warning: query " << list.query_id
                << " has no judgments, excluded from means\n";
      report.skipped.push_back(list.query_id);
      continue;
    }
    QueryMetrics m;
    m.query_id = list.query_id;
    m.ndcg = ndcg_at_k(list, qrels, cfg.ndcg_k, cfg.gain);
    m.map = map_at_k(list, qrels, cfg.map_k, cfg.map_binarize_threshold);
    report.per_query.push_back(m);
  }
  if (report.per_query.empty())
    throw EmptyIntersection("no query in the run has judgments");
  for (const QueryMetrics& m : report.per_query) {
    report.mean_ndcg += m.ndcg;
    report.mean_map += m.map;
  }
  report.mean_ndcg /= static_cast<double>(report.per_query.size());
  report.mean_map /= static_cast<double>(report.per_query.size());
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-16s %12s %12s\n", "query",
                ("ndcg@" + std::to_string(report.ndcg_k)).c_str(),
                ("map@" + std::to_string(report.map_k)).c_str());
  out << line;
  for (const QueryMetrics& m : report.per_query) {
    std::snprintf(line, sizeof(line), "%-16s %12.6f %12.6f\n", m.query_id.c_str(),
                  m.ndcg, m.map);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-16s %12.6f %12.6f\n", "mean", report.mean_ndcg,
                report.mean_map);
  out << line;
  return out.str();
}

void write_per_query_tsv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open metrics output: " + path);
  char line[128];
  out << "query_id\tndcg@" << report.ndcg_k << "\tmap@" << report.map_k << '\n';
  for (const QueryMetrics& m : report.per_query) {
    std::snprintf(line, sizeof(line), "%s\t%.6f\t%.6f\n", m.query_id.c_str(), m.ndcg,
                  m.map);
    out << line;
  }
  std::snprintf(line, sizeof(line), "mean\t%.6f\t%.6f\n", report.mean_ndcg,
                report.mean_map);
  out << line;
}

}  // namespace strank
