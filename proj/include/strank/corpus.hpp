#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace strank {

struct Document {
  std::string doc_id;
  std::string title;  // may be empty
  std::string body;   // stored untruncated
};

struct Query {
  std::string query_id;
  std::string text;
};

// Graded relevance judgments. Absent pairs read as grade 0 (unjudged
// documents are treated as non-relevant, standard TREC behavior).
class QrelsTable {
public:
  void set(const std::string& query_id, const std::string& doc_id, int grade);
  int grade(const std::string& query_id, const std::string& doc_id) const;
  bool has_query(const std::string& query_id) const;
  // All judged (doc_id, grade) pairs for a query; nullptr when none.
  const std::unordered_map<std::string, int>* judged(const std::string& query_id) const;
  std::size_t query_count() const { return by_query_.size(); }

private:
  std::unordered_map<std::string, std::unordered_map<std::string, int>> by_query_;
};

struct RunEntry {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;  // 1-based
};

// One run-file row group: an ordered result list for a single query.
struct RankedList {
  std::string query_id;
  std::vector<RunEntry> entries;
  std::string tag;

  // Throws InvariantViolation unless ranks are 1..n contiguous, doc ids are
  // unique, and scores are non-increasing with rank.
  void validate() const;
};

std::vector<Document> load_corpus(const std::string& path);
std::unordered_map<std::string, std::size_t> doc_index_by_id(const std::vector<Document>& corpus);

std::vector<Query> load_queries(const std::string& path);

QrelsTable load_qrels(const std::string& path);

// Lines `qid Q0 docid rank score tag`, scores fixed at 6 decimal places so
// that write -> read -> write is byte stable.
void write_run(const std::vector<RankedList>& lists, const std::string& path);
std::vector<RankedList> read_run(const std::string& path);

std::string format_score(double score);

}  // namespace strank
