#include "strank/summarize.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "strank/errors.hpp"
#include "strank/retrieval.hpp"
#include "strank/text.hpp"

namespace strank {

bool detect_safeguard(std::string_view text) {
  std::string normalized = collapse_whitespace(to_lower(text));
  return normalized.find("no relevant information found") != std::string::npos;
}

namespace {

std::size_t placeholder_count(const std::string& text, std::string_view placeholder) {
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    ++count;
    pos += placeholder.size();
  }
  return count;
}

constexpr std::string_view kQueryPlaceholder = "{query}";
constexpr std::string_view kDocumentPlaceholder = "{document}";

const char kSummarizeTemplate[] =
    "Task: Generate the summary from the Document that answer the Query.\n"
    "\n"
    "Strict Rules:\n"
    "1. If the Document is NOT relevant to the Query, you MUST output exactly: "
    "'No relevant information found.'\n"
    "2. Do NOT provide explanations, apologies, or conversational fillers like "
    "'The document says...'. Just the answer or the refusal phrase.\n"
    "\n"
    "Query: {query}\n"
    "\n"
    "Document:\n"
    "{document}\n";

const char kRerankTemplate[] =
    "Rank the numbered passages by their relevance to the query, most relevant "
    "first.\n"
    "\n"
    "Query: {query}\n"
    "\n"
    "Passages:\n"
    "{document}\n"
    "\n"
    "Answer with only the bracketed ordering, e.g. [2] > [1] > [3], listing every "
    "passage number exactly once.\n";

}  // namespace

PromptTemplate PromptTemplate::parse(std::string text, std::string version) {
  if (placeholder_count(text, kQueryPlaceholder) != 1)
    throw MissingPlaceholder("template " + version + " must contain {query} exactly once");
  if (placeholder_count(text, kDocumentPlaceholder) != 1)
    throw MissingPlaceholder("template " + version +
                             " must contain {document} exactly once");
  return PromptTemplate{std::move(text), std::move(version)};
}

PromptTemplate PromptTemplate::load_file(const std::string& path) {
  std::string version = path;
  std::size_t slash = version.find_last_of('/');
  if (slash != std::string::npos) version = version.substr(slash + 1);
  std::size_t dot = version.find_last_of('.');
  if (dot != std::string::npos) version = version.substr(0, dot);
  return parse(read_file(path), version);
}

std::string render_prompt(const PromptTemplate& tpl, const Query& query,
                          std::string_view doc_text) {
  // Single pass over the template; substituted values are never rescanned.
  std::string out;
  out.reserve(tpl.text.size() + query.text.size() + doc_text.size());
  std::size_t i = 0;
  while (i < tpl.text.size()) {
    if (tpl.text.compare(i, kQueryPlaceholder.size(), kQueryPlaceholder) == 0) {
      out += query.text;
      i += kQueryPlaceholder.size();
    } else if (tpl.text.compare(i, kDocumentPlaceholder.size(), kDocumentPlaceholder) == 0) {
      out += doc_text;
      i += kDocumentPlaceholder.size();
    } else {
      out.push_back(tpl.text[i]);
      ++i;
    }
  }
  return out;
}

PromptTemplate default_summarize_template() {
  return PromptTemplate::parse(kSummarizeTemplate, "summarize_v1");
}

PromptTemplate default_rerank_template() {
  return PromptTemplate::parse(kRerankTemplate, "rerank_v1");
}

std::string summarize_system_line() {
  return "You summarize documents for a search ranking system and follow the "
         "output rules exactly.";
}

std::string rerank_system_line() {
  return "You order search result passages by relevance and answer only with the "
         "bracketed ordering.";
}

std::string FirstPSummarizer::summarize(const Query& query, const Document& doc) {
  (void)query;
  return first_p(doc, k_);
}

std::string ToySummarizer::summarize(const Query& query, const Document& doc) {
  DocFeatures features = extract_features(query, doc, idf_);
  Rollout rollout = greedy_decode(params_, features, doc.doc_id, budget_);
  if (rollout.text.empty()) return std::string(kSafeguardPhrase);
  return rollout.text;
}

RemoteSummarizer::RemoteSummarizer(RemoteConfig cfg, PromptTemplate tpl)
    : client_(std::move(cfg)), tpl_(std::move(tpl)) {}

std::string RemoteSummarizer::summarize(const Query& query, const Document& doc) {
  std::string body = doc.title.empty() ? doc.body : doc.title + "\n" + doc.body;
  return client_.complete(summarize_system_line(), render_prompt(tpl_, query, body));
}

namespace {

Summary make_summary(SummarizerBackend& backend, const Query& query, const Document& doc) {
  Summary s;
  s.doc_id = doc.doc_id;
  s.query_id = query.query_id;
  try {
    s.text = backend.summarize(query, doc);
    s.backend = backend.name();
  } catch (const BackendUnavailable& e) {
    std::cerr << "warning: summarizer failed for doc " << doc.doc_id << " (" << e.what()
              << "), falling back to firstp-128\n";
    s.text.clear();
  }
  if (s.text.empty() && s.backend != "firstp-128") {
    s.text = first_p(doc, 128);
    s.backend = "firstp-128-fallback";
  }
  if (s.text.empty()) {  // empty document; nothing to extract
    s.text = std::string(kSafeguardPhrase);
  }
  s.is_safeguard = detect_safeguard(s.text);
  return s;
}

}  // namespace

std::vector<Summary> summarize_pointwise(SummarizerBackend& backend, const Query& query,
                                         const std::vector<Document>& docs,
                                         int parallelism) {
  std::vector<Summary> out(docs.size());
  if (docs.empty()) return out;
  const std::size_t workers =
      std::min<std::size_t>(std::max(parallelism, 1), docs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < docs.size(); ++i)
      out[i] = make_summary(backend, query, docs[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= docs.size() || failed.load()) return;
        try {
          out[i] = make_summary(backend, query, docs[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

namespace {

nlohmann::json summary_to_json(const Summary& s) {
  return {{"query_id", s.query_id},
          {"doc_id", s.doc_id},
          {"text", s.text},
          {"is_safeguard", s.is_safeguard},
          {"backend", s.backend}};
}

void write_summary_lines(const std::vector<Summary>& summaries, std::ofstream& out) {
  for (const Summary& s : summaries) out << summary_to_json(s).dump() << '\n';
}

}  // namespace

void write_summaries(const std::vector<Summary>& summaries, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open summary file for writing: " + path);
  write_summary_lines(summaries, out);
  if (!out) throw IoFailure("summary write failed: " + path);
}

void append_summaries(const std::vector<Summary>& summaries, const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoFailure("cannot open summary file for append: " + path);
  write_summary_lines(summaries, out);
  if (!out) throw IoFailure("summary write failed: " + path);
}

std::vector<Summary> read_summaries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open summary file: " + path);
  std::vector<Summary> summaries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw MalformedRecord(path, line_no, line.substr(0, 80));
    Summary s;
    try {
      s.query_id = rec.at("query_id").get<std::string>();
      s.doc_id = rec.at("doc_id").get<std::string>();
      s.text = rec.at("text").get<std::string>();
      s.is_safeguard = rec.at("is_safeguard").get<bool>();
      s.backend = rec.value("backend", std::string());
    } catch (const nlohmann::json::exception&) {
      throw MalformedRecord(path, line_no, line.substr(0, 80));
    }
    summaries.push_back(std::move(s));
  }
  return summaries;
}

SummaryStore::SummaryStore(std::vector<Summary> summaries)
    : summaries_(std::move(summaries)) {
  by_key_.reserve(summaries_.size());
  for (std::size_t i = 0; i < summaries_.size(); ++i)
    by_key_[summaries_[i].query_id + "\x1f" + summaries_[i].doc_id] = i;
}

const Summary* SummaryStore::find(const std::string& query_id,
                                  const std::string& doc_id) const {
  auto it = by_key_.find(query_id + "\x1f" + doc_id);
  return it == by_key_.end() ? nullptr : &summaries_[it->second];
}

}  // namespace strank
