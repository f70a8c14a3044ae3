#include "strank/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "strank/errors.hpp"
#include "strank/text.hpp"

namespace strank {

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

const std::set<std::string>& stopword_set() {
  static const std::set<std::string> kStopwords = {
      "a",  "an",  "and",  "are",   "as",    "at",   "be",   "but",  "by",
      "for", "if",  "in",   "into",  "is",    "it",   "no",   "not",  "of",
      "on",  "or",  "such", "that",  "the",   "their", "then", "there",
      "these", "they", "this", "to", "was",  "will", "with"};
  return kStopwords;
}

// Harman-style s-stemmer: strips simple plural suffixes only.
std::string s_stem(const std::string& token) {
  std::size_t n = token.size();
  if (n > 3 && token.compare(n - 3, 3, "ies") == 0) return token.substr(0, n - 3) + "y";
  if (n > 2 && token.compare(n - 2, 2, "ss") == 0) return token;
  if (n > 3 && token.back() == 's') return token.substr(0, n - 1);
  return token;
}

std::string doc_text(const Document& doc) {
  if (doc.title.empty()) return doc.body;
  return doc.title + " " + doc.body;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back(to_lower(text.substr(start, i - start)));
  }
  return tokens;
}

std::vector<std::string> analyze(std::string_view text, const IndexOptions& options) {
  std::vector<std::string> tokens = tokenize(text);
  if (!options.stopwords && !options.stem) return tokens;
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (std::string& t : tokens) {
    if (options.stopwords && stopword_set().count(t) > 0) continue;
    out.push_back(options.stem ? s_stem(t) : std::move(t));
  }
  return out;
}

InvertedIndex InvertedIndex::build(const std::vector<Document>& corpus,
                                   const IndexOptions& options) {
  if (corpus.empty()) throw EmptyCorpus("cannot build an index over an empty corpus");
  InvertedIndex index;
  index.options_ = options;
  index.doc_ids_.reserve(corpus.size());
  index.lengths_.reserve(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    std::vector<std::string> terms = analyze(doc_text(corpus[d]), options);
    index.doc_ids_.push_back(corpus[d].doc_id);
    index.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    index.total_length_ += terms.size();
    std::map<std::string, std::uint32_t> tf;
    for (const std::string& t : terms) ++tf[t];
    for (auto& [term, count] : tf)
      index.postings_[term].push_back(
          Posting{static_cast<std::uint32_t>(d), count});
  }
  // Postings are appended in ascending internal id by construction.
  return index;
}

double InvertedIndex::avg_doc_length() const {
  return doc_ids_.empty() ? 0.0
                          : static_cast<double>(total_length_) /
                                static_cast<double>(doc_ids_.size());
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

std::uint32_t InvertedIndex::df(const std::string& term) const {
  const std::vector<Posting>* p = postings(term);
  return p == nullptr ? 0 : static_cast<std::uint32_t>(p->size());
}

double InvertedIndex::idf(const std::string& term) const {
  double n = static_cast<double>(doc_count());
  double d = static_cast<double>(df(term));
  return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

void InvertedIndex::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir + "/meta.txt", std::ios::trunc);
    if (!meta) throw IoFailure("cannot write index meta: " + dir);
    meta << "strank-index v1\n";
    meta << "docs " << doc_ids_.size() << '\n';
    meta << "total_len " << total_length_ << '\n';
    meta << "stem " << (options_.stem ? 1 : 0) << '\n';
    meta << "stopwords " << (options_.stopwords ? 1 : 0) << '\n';
  }
  {
    std::ofstream docs(dir + "/docs.txt", std::ios::trunc);
    if (!docs) throw IoFailure("cannot write index docs: " + dir);
    for (std::size_t d = 0; d < doc_ids_.size(); ++d)
      docs << d << ' ' << doc_ids_[d] << ' ' << lengths_[d] << '\n';
  }
  {
    std::ofstream post(dir + "/postings.txt", std::ios::trunc);
    if (!post) throw IoFailure("cannot write index postings: " + dir);
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    for (const std::string* term : terms) {
      const std::vector<Posting>& plist = postings_.at(*term);
      post << *term;
      for (const Posting& p : plist) post << ' ' << p.doc << ' ' << p.tf;
      post << '\n';
    }
  }
}

InvertedIndex InvertedIndex::load(const std::string& dir) {
  InvertedIndex index;
  {
    std::ifstream meta(dir + "/meta.txt");
    if (!meta) throw IoFailure("cannot open index meta: " + dir);
    std::string header;
    std::getline(meta, header);
    if (header != "strank-index v1")
      throw MalformedRecord(dir + "/meta.txt", 1, "unknown index format: " + header);
    std::string key;
    std::size_t docs = 0;
    int stem = 0, stop = 0;
    while (meta >> key) {
      if (key == "docs")
        meta >> docs;
      else if (key == "total_len")
        meta >> index.total_length_;
      else if (key == "stem")
        meta >> stem;
      else if (key == "stopwords")
        meta >> stop;
      else {
        std::string skip;
        meta >> skip;
      }
    }
    index.options_.stem = stem != 0;
    index.options_.stopwords = stop != 0;
    index.doc_ids_.resize(docs);
    index.lengths_.resize(docs, 0);
  }
  {
    std::ifstream docs(dir + "/docs.txt");
    if (!docs) throw IoFailure("cannot open index docs: " + dir);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(docs, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::istringstream ss(line);
      std::size_t internal = 0;
      std::string id;
      std::uint32_t length = 0;
      if (!(ss >> internal >> id >> length) || internal >= index.doc_ids_.size())
        throw MalformedRecord(dir + "/docs.txt", line_no, line);
      index.doc_ids_[internal] = id;
      index.lengths_[internal] = length;
    }
  }
  {
    std::ifstream post(dir + "/postings.txt");
    if (!post) throw IoFailure("cannot open index postings: " + dir);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(post, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::istringstream ss(line);
      std::string term;
      if (!(ss >> term)) throw MalformedRecord(dir + "/postings.txt", line_no, line);
      std::vector<Posting> plist;
      std::uint32_t doc = 0, tf = 0;
      while (ss >> doc >> tf) plist.push_back(Posting{doc, tf});
      if (plist.empty()) throw MalformedRecord(dir + "/postings.txt", line_no, line);
      index.postings_.emplace(std::move(term), std::move(plist));
    }
  }
  return index;
}

IdfWeights IdfWeights::from_index(const InvertedIndex& index) {
  IdfWeights w;
  w.fallback = index.idf("\x01nonexistent\x01");
  w.weights.reserve(index.terms().size());
  for (const auto& [term, postings] : index.terms()) w.weights.emplace(term, index.idf(term));
  return w;
}

IdfWeights IdfWeights::from_index_terms(const InvertedIndex& index,
                                        const std::vector<std::string>& terms) {
  IdfWeights w;
  w.fallback = index.idf("\x01nonexistent\x01");
  for (const std::string& term : terms) w.weights.emplace(term, index.idf(term));
  return w;
}

double bm25_term_score(double tf, double idf, double doc_len, double avg_len,
                       const Bm25Params& params) {
  if (tf <= 0.0) return 0.0;
  double norm = params.k1 * (1.0 - params.b + params.b * doc_len / avg_len);
  return idf * tf * (params.k1 + 1.0) / (tf + norm);
}

RankedList retrieve_top_n(const InvertedIndex& index, const Query& query, std::size_t n,
                          const Bm25Params& params) {
  RankedList result{query.query_id, {}, "bm25"};
  std::vector<std::string> terms = analyze(query.text, index.options());
  if (terms.empty()) return result;
  const double avg_len = index.avg_doc_length();
  std::unordered_map<std::uint32_t, double> scores;
  for (const std::string& term : terms) {
    const std::vector<Posting>* plist = index.postings(term);
    if (plist == nullptr) continue;
    const double idf = index.idf(term);
    for (const Posting& p : *plist)
      scores[p.doc] += bm25_term_score(p.tf, idf, index.doc_length(p.doc), avg_len, params);
  }
  std::vector<std::pair<std::uint32_t, double>> ranked;
  ranked.reserve(scores.size());
  for (const auto& [doc, score] : scores)
    if (score > 0.0) ranked.emplace_back(doc, score);
  std::sort(ranked.begin(), ranked.end(),
            [&index](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return index.doc_id(a.first) < index.doc_id(b.first);
            });
  if (ranked.size() > n) ranked.resize(n);
  result.entries.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i)
    result.entries.push_back(RunEntry{index.doc_id(ranked[i].first), ranked[i].second,
                                      static_cast<int>(i) + 1});
  return result;
}

std::string first_p(const Document& doc, std::size_t k) {
  std::vector<std::string> tokens = split_whitespace(
      doc.title.empty() ? doc.body : doc.title + " " + doc.body);
  if (tokens.size() > k) tokens.resize(k);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace strank
