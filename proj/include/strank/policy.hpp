#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "strank/corpus.hpp"
#include "strank/retrieval.hpp"

namespace strank {

// A small trainable extractive summarization policy. Decoding is a short
// decision sequence: a gate token (REJECT ends the sequence and emits the
// safeguard phrase, CONTINUE proceeds) followed by one INCLUDE/SKIP token per
// document sentence. Both decisions are Bernoulli with logistic probabilities
// over hand-built features, so every probability, gradient, and KL term used
// in training is exact and cheap to enumerate in tests.

// Splits on . ! ? followed by whitespace; fragments shorter than 3 tokens are
// merged into the previous sentence. Non-blank input yields at least one
// sentence (the whole text at worst).
std::vector<std::string> sentence_split(std::string_view doc_text);

inline constexpr int kGateFeatureDim = 3;      // bias, max overlap, mean overlap
inline constexpr int kSentenceFeatureDim = 5;  // bias, overlap, idf overlap, position, length

struct DocFeatures {
  std::vector<std::string> sentences;
  std::vector<double> gate;                    // kGateFeatureDim
  std::vector<std::vector<double>> sentence;   // kSentenceFeatureDim each
};

DocFeatures extract_features(const Query& query, const std::vector<std::string>& sentences,
                             const IdfWeights& idf);
DocFeatures extract_features(const Query& query, const Document& doc, const IdfWeights& idf);

struct PolicyParams {
  std::vector<double> gate_weights;     // kGateFeatureDim
  std::vector<double> include_weights;  // kSentenceFeatureDim

  static PolicyParams zeros();
  bool all_finite() const;
  std::size_t size() const { return gate_weights.size() + include_weights.size(); }
  double& at(std::size_t i);
  double at(std::size_t i) const;

  void save(const std::string& path) const;
  static PolicyParams load(const std::string& path);
};

// One sampled decoding trajectory for a (query, document) pair.
struct Rollout {
  std::string doc_id;
  bool rejected = false;
  std::vector<std::uint8_t> includes;  // per sentence; empty when rejected
  std::vector<double> log_probs;       // per free token, sampling-time policy
  std::string text;                    // rendered summary
};

// Sentence tokens become forced SKIPs (probability 1, excluded from losses
// and log-probs) once `budget` sentences have been included.
inline constexpr int kDefaultSentenceBudget = 3;

double sigmoid(double logit);
double log_sigmoid(double logit);  // numerically stable

double gate_logit(const PolicyParams& params, const DocFeatures& features);
double include_logit(const PolicyParams& params, const DocFeatures& features, std::size_t s);

// Per-free-token log-probabilities of the rollout's decisions under params.
std::vector<double> rollout_token_log_probs(const PolicyParams& params,
                                            const DocFeatures& features,
                                            const Rollout& rollout, int budget);
double rollout_log_prob(const PolicyParams& params, const DocFeatures& features,
                        const Rollout& rollout, int budget);

// REJECT renders the safeguard phrase; CONTINUE renders the included
// sentences in source order (possibly empty).
std::string render_rollout_text(const Rollout& rollout, const DocFeatures& features);

Rollout greedy_decode(const PolicyParams& params, const DocFeatures& features,
                      const std::string& doc_id, int budget);
Rollout sample_rollout(const PolicyParams& params, const DocFeatures& features,
                       const std::string& doc_id, int budget, std::mt19937_64& rng);
std::vector<Rollout> sample_rollouts(const PolicyParams& params, const DocFeatures& features,
                                     const std::string& doc_id, int budget, int group_size,
                                     std::uint64_t seed);

// Global decode counter, used to assert the O(G)-decodes-per-step property.
std::uint64_t policy_decode_count();
void reset_policy_decode_count();

}  // namespace strank
