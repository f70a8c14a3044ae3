#include "strank/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "strank/errors.hpp"
#include "strank/rng.hpp"
#include "strank/summarize.hpp"
#include "strank/text.hpp"

namespace strank {

namespace {

std::atomic<std::uint64_t> g_decode_count{0};

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", w);
  return buf;
}

}  // namespace

std::vector<std::string> sentence_split(std::string_view doc_text) {
  std::vector<std::string> fragments;
  std::size_t start = 0;
  for (std::size_t i = 0; i < doc_text.size(); ++i) {
    if (is_terminator(doc_text[i]) &&
        (i + 1 == doc_text.size() ||
         std::isspace(static_cast<unsigned char>(doc_text[i + 1])))) {
      std::string fragment = trim(doc_text.substr(start, i - start + 1));
      if (!fragment.empty()) fragments.push_back(std::move(fragment));
      start = i + 1;
    }
  }
  if (start < doc_text.size()) {
    std::string tail = trim(doc_text.substr(start));
    if (!tail.empty()) fragments.push_back(std::move(tail));
  }

  std::vector<std::string> sentences;
  for (std::string& fragment : fragments) {
    if (!sentences.empty() && count_whitespace_tokens(fragment) < 3) {
      sentences.back().push_back(' ');
      sentences.back() += fragment;
    } else {
      sentences.push_back(std::move(fragment));
    }
  }
  return sentences;
}

DocFeatures extract_features(const Query& query, const std::vector<std::string>& sentences,
                             const IdfWeights& idf) {
  DocFeatures f;
  f.sentences = sentences;
  std::vector<std::string> query_tokens = tokenize(query.text);
  std::set<std::string> query_terms(query_tokens.begin(), query_tokens.end());
  double idf_total = 0.0;
  for (const std::string& t : query_terms) idf_total += idf.get(t);

  f.sentence.reserve(sentences.size());
  double max_overlap = 0.0, sum_overlap = 0.0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    std::vector<std::string> sent_tokens = tokenize(sentences[s]);
    std::set<std::string> sent_terms(sent_tokens.begin(), sent_tokens.end());
    double covered = 0.0, covered_idf = 0.0;
    for (const std::string& t : query_terms) {
      if (sent_terms.count(t) > 0) {
        covered += 1.0;
        covered_idf += idf.get(t);
      }
    }
    double overlap = query_terms.empty() ? 0.0 : covered / static_cast<double>(query_terms.size());
    double idf_overlap = idf_total > 0.0 ? covered_idf / idf_total : 0.0;
    double position = 1.0 / (1.0 + static_cast<double>(s));
    double length = std::min(1.0, static_cast<double>(sent_tokens.size()) / 30.0);
    f.sentence.push_back({1.0, overlap, idf_overlap, position, length});
    max_overlap = std::max(max_overlap, overlap);
    sum_overlap += overlap;
  }
  double mean_overlap =
      sentences.empty() ? 0.0 : sum_overlap / static_cast<double>(sentences.size());
  f.gate = {1.0, max_overlap, mean_overlap};
  return f;
}

DocFeatures extract_features(const Query& query, const Document& doc, const IdfWeights& idf) {
  std::string text = doc.title.empty() ? doc.body : doc.title + " " + doc.body;
  return extract_features(query, sentence_split(text), idf);
}

PolicyParams PolicyParams::zeros() {
  PolicyParams p;
  p.gate_weights.assign(kGateFeatureDim, 0.0);
  p.include_weights.assign(kSentenceFeatureDim, 0.0);
  return p;
}

bool PolicyParams::all_finite() const {
  for (double w : gate_weights)
    if (!std::isfinite(w)) return false;
  for (double w : include_weights)
    if (!std::isfinite(w)) return false;
  return true;
}

double& PolicyParams::at(std::size_t i) {
  return i < gate_weights.size() ? gate_weights[i] : include_weights[i - gate_weights.size()];
}

double PolicyParams::at(std::size_t i) const {
  return i < gate_weights.size() ? gate_weights[i] : include_weights[i - gate_weights.size()];
}

void PolicyParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot write checkpoint: " + path);
  out << "strank-policy v1\n";
  out << "gate_weights " << gate_weights.size() << '\n';
  for (std::size_t i = 0; i < gate_weights.size(); ++i)
    out << (i ? " " : "") << format_weight(gate_weights[i]);
  out << '\n';
  out << "include_weights " << include_weights.size() << '\n';
  for (std::size_t i = 0; i < include_weights.size(); ++i)
    out << (i ? " " : "") << format_weight(include_weights[i]);
  out << '\n';
  if (!out) throw IoFailure("checkpoint write failed: " + path);
}

PolicyParams PolicyParams::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open checkpoint: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "strank-policy v1")
    throw MalformedRecord(path, 1, "unknown checkpoint format: " + header);
  PolicyParams p;
  auto read_vector = [&](const std::string& expected, std::vector<double>& into) {
    std::string name;
    std::size_t n = 0;
    if (!(in >> name >> n) || name != expected)
      throw MalformedRecord(path, 0, "expected vector " + expected);
    into.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!(in >> into[i])) throw MalformedRecord(path, 0, "truncated vector " + expected);
  };
  read_vector("gate_weights", p.gate_weights);
  read_vector("include_weights", p.include_weights);
  return p;
}

double sigmoid(double logit) { return 1.0 / (1.0 + std::exp(-logit)); }

double log_sigmoid(double logit) {
  if (logit >= 0.0) return -std::log1p(std::exp(-logit));
  return logit - std::log1p(std::exp(logit));
}

namespace {

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

double gate_logit(const PolicyParams& params, const DocFeatures& features) {
  return dot(params.gate_weights, features.gate);
}

double include_logit(const PolicyParams& params, const DocFeatures& features, std::size_t s) {
  return dot(params.include_weights, features.sentence[s]);
}

std::vector<double> rollout_token_log_probs(const PolicyParams& params,
                                            const DocFeatures& features,
                                            const Rollout& rollout, int budget) {
  std::vector<double> lps;
  double gate = gate_logit(params, features);
  lps.push_back(rollout.rejected ? log_sigmoid(-gate) : log_sigmoid(gate));
  if (rollout.rejected) return lps;
  int included = 0;
  for (std::size_t s = 0; s < rollout.includes.size(); ++s) {
    if (included >= budget) break;  // forced SKIPs carry probability 1
    double logit = include_logit(params, features, s);
    lps.push_back(rollout.includes[s] ? log_sigmoid(logit) : log_sigmoid(-logit));
    if (rollout.includes[s]) ++included;
  }
  return lps;
}

double rollout_log_prob(const PolicyParams& params, const DocFeatures& features,
                        const Rollout& rollout, int budget) {
  double total = 0.0;
  for (double lp : rollout_token_log_probs(params, features, rollout, budget)) total += lp;
  return total;
}

std::string render_rollout_text(const Rollout& rollout, const DocFeatures& features) {
  if (rollout.rejected) return std::string(kSafeguardPhrase);
  std::string text;
  for (std::size_t s = 0; s < rollout.includes.size(); ++s) {
    if (!rollout.includes[s]) continue;
    if (!text.empty()) text.push_back(' ');
    text += features.sentences[s];
  }
  return text;
}

namespace {

Rollout decode(const PolicyParams& params, const DocFeatures& features,
               const std::string& doc_id, int budget, std::mt19937_64* rng) {
  g_decode_count.fetch_add(1, std::memory_order_relaxed);
  Rollout r;
  r.doc_id = doc_id;
  double gate = gate_logit(params, features);
  double p_continue = sigmoid(gate);
  bool go = rng != nullptr ? uniform_unit(*rng) < p_continue : p_continue >= 0.5;
  if (!go) {
    r.rejected = true;
    r.log_probs.push_back(log_sigmoid(-gate));
    r.text = render_rollout_text(r, features);
    return r;
  }
  r.log_probs.push_back(log_sigmoid(gate));
  r.includes.assign(features.sentence.size(), 0);
  int included = 0;
  for (std::size_t s = 0; s < features.sentence.size(); ++s) {
    if (included >= budget) break;  // remaining tokens are forced SKIPs
    double logit = include_logit(params, features, s);
    double p_include = sigmoid(logit);
    bool take = rng != nullptr ? uniform_unit(*rng) < p_include : p_include >= 0.5;
    r.includes[s] = take ? 1 : 0;
    r.log_probs.push_back(take ? log_sigmoid(logit) : log_sigmoid(-logit));
    if (take) ++included;
  }
  r.text = render_rollout_text(r, features);
  return r;
}

}  // namespace

Rollout greedy_decode(const PolicyParams& params, const DocFeatures& features,
                      const std::string& doc_id, int budget) {
  return decode(params, features, doc_id, budget, nullptr);
}

Rollout sample_rollout(const PolicyParams& params, const DocFeatures& features,
                       const std::string& doc_id, int budget, std::mt19937_64& rng) {
  return decode(params, features, doc_id, budget, &rng);
}

std::vector<Rollout> sample_rollouts(const PolicyParams& params, const DocFeatures& features,
                                     const std::string& doc_id, int budget, int group_size,
                                     std::uint64_t seed) {
  std::vector<Rollout> group;
  group.reserve(static_cast<std::size_t>(group_size));
  for (int g = 0; g < group_size; ++g) {
    std::mt19937_64 rng = derived_rng(seed, "rollout:" + std::to_string(g));
    group.push_back(sample_rollout(params, features, doc_id, budget, rng));
  }
  return group;
}

std::uint64_t policy_decode_count() { return g_decode_count.load(std::memory_order_relaxed); }
void reset_policy_decode_count() { g_decode_count.store(0, std::memory_order_relaxed); }

}  // namespace strank
