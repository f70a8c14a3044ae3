#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strank/policy.hpp"
#include "strank/rerank.hpp"
#include "strank/rl_data.hpp"

namespace strank {

// ---------------------------------------------------------------------------
// Cold-start supervised fine-tuning against a heuristic overlap teacher.

struct TeacherLabels {
  bool continue_gate = false;          // CONTINUE iff any sentence qualifies
  std::vector<std::uint8_t> includes;  // INCLUDE iff sentence overlap >= tau
};

TeacherLabels teacher_labels(const DocFeatures& features, double tau);

struct SftConfig {
  int epochs = 5;
  double learning_rate = 0.05;
  double teacher_tau = 0.2;
  int budget = kDefaultSentenceBudget;
  std::uint64_t seed = 7;
};

struct SftStep {
  double loss = 0.0;   // mean NLL over free tokens
  PolicyParams grad;   // d(loss)/d(params)
};

SftStep sft_step(const PolicyParams& params, const TeacherLabels& labels,
                 const DocFeatures& features, int budget);

// Per-example SGD over every candidate document of every instance.
PolicyParams train_sft(const std::vector<RlInstance>& instances, const SftConfig& cfg,
                       std::vector<double>* epoch_losses = nullptr);

// ---------------------------------------------------------------------------
// Rank-driven alignment.

struct GrpoConfig {
  int group_size = 8;           // G
  double clip_epsilon = 0.2;    // ratio clip threshold
  double kl_beta = 0.001;       // KL penalty coefficient
  double penalty_lambda = 0.25; // unrejected-negative penalty
  double learning_rate = 0.05;
  int epochs = 5;
  int budget = kDefaultSentenceBudget;
  double advantage_std_floor = 1e-8;
  std::uint64_t seed = 7;
  int reward_ndcg_k = 10;
  WindowPlan window;

  void validate() const;
};

// Background list with position t's text replaced by the rollout text; the
// other N-1 entries are byte-identical to the frozen background.
std::vector<WindowItem> assemble_eval_list(const RlInstance& instance, int t,
                                           const std::string& rollout_text);

// Conditional reward: R for positive targets, 1.0 for rejected negatives,
// R - lambda for unrejected negatives.
double conditional_reward(double ndcg, bool target_positive, bool safeguard,
                          double lambda);

// Reranks the mixed evaluation list and derives the reward from NDCG@k over
// qrels restricted to the instance's candidates.
double compute_reward(const RlInstance& instance, int target_index, const Rollout& rollout,
                      RerankerBackend& reranker, const GrpoConfig& cfg);

// Z-scores with population sigma; all zeros when sigma < floor.
std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                         double std_floor);

struct GrpoStepStats {
  double objective = 0.0;  // surrogate - beta * KL
  double surrogate = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;  // tokens with ratio outside [1-eps, 1+eps]
};

// Clipped-surrogate objective with a per-token Bernoulli KL anchor to the
// reference policy; token terms are averaged per rollout, then over the group.
double grpo_objective(const PolicyParams& params, const PolicyParams& ref_params,
                      const PolicyParams& old_params, const std::vector<Rollout>& group,
                      const std::vector<double>& advantages, const DocFeatures& features,
                      const GrpoConfig& cfg);

// One ascent step with the exact gradient (clamped branches contribute zero).
// Throws NonFiniteGradient with a state dump if the gradient degenerates.
GrpoStepStats grpo_step(PolicyParams& params, const PolicyParams& ref_params,
                        const PolicyParams& old_params, const std::vector<Rollout>& group,
                        const std::vector<double>& advantages, const DocFeatures& features,
                        const GrpoConfig& cfg);

struct EpochMetrics {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  double heldout_ndcg10 = 0.0;
  double heldout_safeguard_rate = 0.0;  // over held-out negative candidates
};

struct PolicyEval {
  double mean_ndcg10 = 0.0;
  double safeguard_rate_negatives = 0.0;
};

// Greedy-decodes every candidate of every instance with the given params,
// reranks with a lexical backend, and averages NDCG@10 over instances.
PolicyEval evaluate_policy(const PolicyParams& params,
                           const std::vector<RlInstance>& instances,
                           const GrpoConfig& cfg);

struct GrpoTrainResult {
  PolicyParams params;
  std::vector<EpochMetrics> log;
};

// Per query per epoch: one positive and one negative target, G rollouts each,
// one step per target. Backgrounds are built (greedy, from the SFT params)
// when absent and stay frozen for the whole run.
GrpoTrainResult train_grpo(std::vector<RlInstance>& train_instances,
                           const std::vector<RlInstance>& heldout_instances,
                           const PolicyParams& sft_params, const GrpoConfig& cfg);

// CSV: epoch,mean_reward,mean_kl,clip_fraction,heldout_ndcg10
void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::string& path);

}  // namespace strank
