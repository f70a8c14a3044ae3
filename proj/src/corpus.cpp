#include "strank/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "strank/errors.hpp"
#include "strank/text.hpp"

namespace strank {

namespace {

std::string excerpt(const std::string& line) {
  constexpr std::size_t kMax = 80;
  if (line.size() <= kMax) return line;
  return line.substr(0, kMax) + "...";
}

}  // namespace

void QrelsTable::set(const std::string& query_id, const std::string& doc_id, int grade) {
  by_query_[query_id][doc_id] = grade;
}

int QrelsTable::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = by_query_.find(query_id);
  if (q == by_query_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

bool QrelsTable::has_query(const std::string& query_id) const {
  return by_query_.count(query_id) > 0;
}

const std::unordered_map<std::string, int>* QrelsTable::judged(
    const std::string& query_id) const {
  auto q = by_query_.find(query_id);
  return q == by_query_.end() ? nullptr : &q->second;
}

void RankedList::validate() const {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const RunEntry& e = entries[i];
    if (e.rank != static_cast<int>(i) + 1)
      throw InvariantViolation("query " + query_id + ": rank " + std::to_string(e.rank) +
                               " at position " + std::to_string(i + 1) +
                               " (ranks must be 1..n contiguous)");
    if (!seen.insert(e.doc_id).second)
      throw InvariantViolation("query " + query_id + ": duplicate doc id " + e.doc_id);
    if (i > 0 && entries[i - 1].score < e.score)
      throw InvariantViolation("query " + query_id + ": scores increase at rank " +
                               std::to_string(e.rank));
  }
}

std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open corpus file: " + path);
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("docid") ||
        !rec.contains("body"))
      throw MalformedRecord(path, line_no, excerpt(line));
    Document d;
    try {
      d.doc_id = rec.at("docid").get<std::string>();
      d.title = rec.value("title", std::string());
      d.body = rec.at("body").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw MalformedRecord(path, line_no, excerpt(line));
    }
    if (d.doc_id.empty()) throw MalformedRecord(path, line_no, "empty docid");
    if (!ids.insert(d.doc_id).second) throw DuplicateDocId(d.doc_id);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::unordered_map<std::string, std::size_t> doc_index_by_id(
    const std::vector<Document>& corpus) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus[i].doc_id, i);
  return index;
}

std::vector<Query> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open queries file: " + path);
  std::vector<Query> queries;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw MalformedRecord(path, line_no, excerpt(line));
    Query q{line.substr(0, tab), trim(line.substr(tab + 1))};
    if (!ids.insert(q.query_id).second)
      throw MalformedRecord(path, line_no, "duplicate query id " + q.query_id);
    queries.push_back(std::move(q));
  }
  return queries;
}

QrelsTable load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open qrels file: " + path);
  QrelsTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string qid, iteration, docid;
    long grade = 0;
    if (!(ss >> qid >> iteration >> docid >> grade))
      throw MalformedRecord(path, line_no, excerpt(line));
    std::string extra;
    if (ss >> extra) throw MalformedRecord(path, line_no, excerpt(line));
    if (grade < 0)
      throw NegativeGrade(path + ":" + std::to_string(line_no) + ": negative grade " +
                          std::to_string(grade));
    if (table.judged(qid) != nullptr && table.judged(qid)->count(docid) > 0)
      std::cerr << "warning: " << path << ":" << line_no << ": repeated judgment for ("
                << qid << ", " << docid << "), keeping the last\n";
    table.set(qid, docid, static_cast<int>(grade));
  }
  return table;
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", score);
  return buf;
}

void write_run(const std::vector<RankedList>& lists, const std::string& path) {
  for (const RankedList& list : lists) list.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open run file for writing: " + path);
  for (const RankedList& list : lists)
    for (const RunEntry& e : list.entries)
      out << list.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' '
          << format_score(e.score) << ' ' << list.tag << '\n';
  if (!out) throw IoFailure("write failed: " + path);
}

std::vector<RankedList> read_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open run file: " + path);
  std::vector<RankedList> lists;
  std::unordered_map<std::string, std::size_t> position;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, docid, tag;
    int rank = 0;
    double score = 0.0;
    if (!(ss >> qid >> q0 >> docid >> rank >> score >> tag) || q0 != "Q0")
      throw MalformedRecord(path, line_no, excerpt(line));
    auto it = position.find(qid);
    if (it == position.end()) {
      position.emplace(qid, lists.size());
      lists.push_back(RankedList{qid, {}, tag});
      it = position.find(qid);
    }
    lists[it->second].entries.push_back(RunEntry{docid, score, rank});
  }
  for (RankedList& list : lists) list.validate();
  return lists;
}

}  // namespace strank
