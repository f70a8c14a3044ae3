#include "strank/rl_data.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "strank/errors.hpp"
#include "strank/rng.hpp"
#include "strank/text.hpp"

namespace strank {

void RlDataConfig::validate() const {
  if (n < 2) throw ConfigError("rl data requires n >= 2");
  if (k < 1 || k >= n) throw ConfigError("rl data requires 1 <= k < n");
  if (positive_threshold < 1) throw ConfigError("positive threshold must be >= 1");
}

bool RlInstance::has_label(CandidateLabel label) const {
  for (const Candidate& c : candidates)
    if (c.label == label) return true;
  return false;
}

std::vector<std::size_t> RlInstance::indices_with_label(CandidateLabel label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].label == label) out.push_back(i);
  return out;
}

namespace {

Candidate make_candidate(const std::string& doc_id, const QrelsTable& qrels,
                         const Query& query, const std::vector<Document>& corpus,
                         const std::unordered_map<std::string, std::size_t>& by_id,
                         int positive_threshold) {
  Candidate c;
  c.doc_id = doc_id;
  c.grade = qrels.grade(query.query_id, doc_id);
  c.label = c.grade >= positive_threshold ? CandidateLabel::kPositive
                                          : CandidateLabel::kNegative;
  auto it = by_id.find(doc_id);
  if (it == by_id.end())
    throw InvariantViolation("candidate doc " + doc_id + " missing from corpus");
  c.title = corpus[it->second].title;
  c.body = corpus[it->second].body;
  return c;
}

// Removes and returns one uniformly sampled element.
std::string take_sample(std::vector<std::string>& pool, std::mt19937_64& rng) {
  std::size_t i = static_cast<std::size_t>(uniform_below(rng, pool.size()));
  std::string out = pool[i];
  pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  return out;
}

}  // namespace

RlInstance build_candidate_list(const Query& query, const InvertedIndex& index,
                                const QrelsTable& qrels,
                                const std::vector<Document>& corpus,
                                const std::unordered_map<std::string, std::size_t>& by_id,
                                const RlDataConfig& cfg) {
  cfg.validate();
  const auto* judged = qrels.judged(query.query_id);
  std::vector<std::string> positive_pool, negative_pool;
  if (judged != nullptr) {
    for (const auto& [doc_id, grade] : *judged) {
      if (by_id.count(doc_id) == 0) continue;  // judged but absent from corpus
      (grade >= cfg.positive_threshold ? positive_pool : negative_pool).push_back(doc_id);
    }
  }
  std::sort(positive_pool.begin(), positive_pool.end());
  std::sort(negative_pool.begin(), negative_pool.end());
  if (positive_pool.empty() || negative_pool.empty())
    throw InsufficientJudgments("query " + query.query_id +
                                " lacks a judged positive or negative in the corpus");

  RlInstance instance;
  instance.query = query;
  instance.seed = cfg.seed;
  std::mt19937_64 rng = derived_rng(cfg.seed, "rl-data:" + query.query_id);

  RankedList retrieved = retrieve_top_n(index, query, static_cast<std::size_t>(cfg.n),
                                        cfg.bm25);
  for (const RunEntry& e : retrieved.entries)
    instance.candidates.push_back(
        make_candidate(e.doc_id, qrels, query, corpus, by_id, cfg.positive_threshold));

  auto present = [&](const std::string& doc_id) {
    for (const Candidate& c : instance.candidates)
      if (c.doc_id == doc_id) return true;
    return false;
  };

  // Short retrieval: pad to n from the union of both judged pools.
  if (instance.candidates.size() < static_cast<std::size_t>(cfg.n)) {
    std::vector<std::string> pad_pool;
    for (const std::string& d : positive_pool)
      if (!present(d)) pad_pool.push_back(d);
    for (const std::string& d : negative_pool)
      if (!present(d)) pad_pool.push_back(d);
    std::sort(pad_pool.begin(), pad_pool.end());
    while (instance.candidates.size() < static_cast<std::size_t>(cfg.n) &&
           !pad_pool.empty()) {
      std::string doc_id = take_sample(pad_pool, rng);
      instance.candidates.push_back(
          make_candidate(doc_id, qrels, query, corpus, by_id, cfg.positive_threshold));
      ++instance.injected_count;
    }
    if (instance.candidates.size() < static_cast<std::size_t>(cfg.n))
      throw InsufficientJudgments("query " + query.query_id +
                                  " cannot fill a list of " + std::to_string(cfg.n));
  }

  // One label entirely missing: replace the k lowest-ranked candidates with
  // seeded samples from the missing label's pool.
  const bool has_pos = instance.has_label(CandidateLabel::kPositive);
  const bool has_neg = instance.has_label(CandidateLabel::kNegative);
  if (!has_pos || !has_neg) {
    std::vector<std::string>& pool = !has_pos ? positive_pool : negative_pool;
    std::vector<std::string> eligible;
    for (const std::string& d : pool)
      if (!present(d)) eligible.push_back(d);
    if (eligible.empty())
      throw InsufficientJudgments("query " + query.query_id +
                                  " has no injectable doc for the missing label");
    const std::size_t inject =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.k), eligible.size());
    instance.candidates.resize(instance.candidates.size() - inject);
    for (std::size_t i = 0; i < inject; ++i) {
      std::string doc_id = take_sample(eligible, rng);
      instance.candidates.push_back(
          make_candidate(doc_id, qrels, query, corpus, by_id, cfg.positive_threshold));
      ++instance.injected_count;
    }
  }

  shuffle_in_place(instance.candidates, rng);

  if (!instance.has_label(CandidateLabel::kPositive) ||
      !instance.has_label(CandidateLabel::kNegative))
    throw InsufficientJudgments("query " + query.query_id +
                                " list composition invariant unsatisfiable");

  instance.term_idf = IdfWeights::from_index_terms(index, tokenize(query.text));
  return instance;
}

void build_background_summaries(RlInstance& instance, SummarizerBackend& backend) {
  instance.background.clear();
  instance.background.reserve(instance.candidates.size());
  for (const Candidate& c : instance.candidates) {
    Document doc{c.doc_id, c.title, c.body};
    Summary s;
    s.doc_id = c.doc_id;
    s.query_id = instance.query.query_id;
    s.text = backend.summarize(instance.query, doc);
    if (s.text.empty()) s.text = first_p(doc, 128);
    if (s.text.empty()) s.text = std::string(kSafeguardPhrase);
    s.is_safeguard = detect_safeguard(s.text);
    s.backend = backend.name();
    instance.background.push_back(std::move(s));
  }
}

std::vector<RlInstance> build_rl_dataset(const std::vector<Query>& queries,
                                         const InvertedIndex& index,
                                         const QrelsTable& qrels,
                                         const std::vector<Document>& corpus,
                                         const RlDataConfig& cfg) {
  std::unordered_map<std::string, std::size_t> by_id = doc_index_by_id(corpus);
  std::vector<RlInstance> instances;
  instances.reserve(queries.size());
  for (const Query& query : queries) {
    try {
      instances.push_back(build_candidate_list(query, index, qrels, corpus, by_id, cfg));
    } catch (const InsufficientJudgments& e) {
      std::cerr << "warning: skipping query " << query.query_id << ": " << e.what()
                << '\n';
    }
  }
  return instances;
}

namespace {

nlohmann::json instance_to_json(const RlInstance& inst) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const Candidate& c : inst.candidates)
    candidates.push_back({{"doc_id", c.doc_id},
                          {"label", c.label == CandidateLabel::kPositive ? "positive"
                                                                         : "negative"},
                          {"grade", c.grade},
                          {"title", c.title},
                          {"body", c.body}});
  nlohmann::json idf = nlohmann::json::object();
  for (const auto& [term, weight] : inst.term_idf.weights) idf[term] = weight;
  nlohmann::json out = {{"query_id", inst.query.query_id},
                        {"query_text", inst.query.text},
                        {"seed", inst.seed},
                        {"injected_count", inst.injected_count},
                        {"candidates", candidates},
                        {"term_idf", idf},
                        {"idf_fallback", inst.term_idf.fallback}};
  if (!inst.background.empty()) {
    nlohmann::json background = nlohmann::json::array();
    for (const Summary& s : inst.background)
      background.push_back({{"doc_id", s.doc_id},
                            {"text", s.text},
                            {"is_safeguard", s.is_safeguard},
                            {"backend", s.backend}});
    out["background"] = background;
  }
  return out;
}

RlInstance instance_from_json(const nlohmann::json& rec) {
  RlInstance inst;
  inst.query.query_id = rec.at("query_id").get<std::string>();
  inst.query.text = rec.at("query_text").get<std::string>();
  inst.seed = rec.at("seed").get<std::uint64_t>();
  inst.injected_count = rec.at("injected_count").get<int>();
  for (const nlohmann::json& c : rec.at("candidates")) {
    Candidate cand;
    cand.doc_id = c.at("doc_id").get<std::string>();
    cand.label = c.at("label").get<std::string>() == "positive"
                     ? CandidateLabel::kPositive
                     : CandidateLabel::kNegative;
    cand.grade = c.at("grade").get<int>();
    cand.title = c.value("title", std::string());
    cand.body = c.at("body").get<std::string>();
    inst.candidates.push_back(std::move(cand));
  }
  if (rec.contains("term_idf"))
    for (const auto& [term, weight] : rec.at("term_idf").items())
      inst.term_idf.weights[term] = weight.get<double>();
  inst.term_idf.fallback = rec.value("idf_fallback", 1.0);
  if (rec.contains("background")) {
    for (const nlohmann::json& b : rec.at("background")) {
      Summary s;
      s.doc_id = b.at("doc_id").get<std::string>();
      s.query_id = inst.query.query_id;
      s.text = b.at("text").get<std::string>();
      s.is_safeguard = b.at("is_safeguard").get<bool>();
      s.backend = b.value("backend", std::string());
      inst.background.push_back(std::move(s));
    }
  }
  return inst;
}

}  // namespace

void write_rl_instances(const std::vector<RlInstance>& instances, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open rl data file for writing: " + path);
  for (const RlInstance& inst : instances) out << instance_to_json(inst).dump() << '\n';
  if (!out) throw IoFailure("rl data write failed: " + path);
}

std::vector<RlInstance> read_rl_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open rl data file: " + path);
  std::vector<RlInstance> instances;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw MalformedRecord(path, line_no, line.substr(0, 80));
    try {
      instances.push_back(instance_from_json(rec));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(path, line_no, e.what());
    }
  }
  return instances;
}

}  // namespace strank
