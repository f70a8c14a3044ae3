#include "strank/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "strank/errors.hpp"
#include "strank/metrics.hpp"
#include "strank/rng.hpp"

namespace strank {

TeacherLabels teacher_labels(const DocFeatures& features, double tau) {
  TeacherLabels labels;
  labels.includes.reserve(features.sentence.size());
  for (const std::vector<double>& sf : features.sentence) {
    bool include = sf[1] >= tau;  // term-overlap fraction
    labels.includes.push_back(include ? 1 : 0);
    if (include) labels.continue_gate = true;
  }
  return labels;
}

SftStep sft_step(const PolicyParams& params, const TeacherLabels& labels,
                 const DocFeatures& features, int budget) {
  SftStep step;
  step.grad = PolicyParams::zeros();

  // Token contributions are collected unscaled, then divided by the free
  // token count T.
  double nll_sum = 0.0;
  std::size_t free_tokens = 0;

  const double gate = gate_logit(params, features);
  const double p_continue = sigmoid(gate);
  const double gate_action = labels.continue_gate ? 1.0 : 0.0;
  nll_sum += -(labels.continue_gate ? log_sigmoid(gate) : log_sigmoid(-gate));
  ++free_tokens;
  for (int j = 0; j < kGateFeatureDim; ++j)
    step.grad.gate_weights[j] += (p_continue - gate_action) * features.gate[j];

  if (labels.continue_gate) {
    int included = 0;
    for (std::size_t s = 0; s < labels.includes.size(); ++s) {
      if (included >= budget) break;  // forced SKIPs are excluded from the loss
      const double logit = include_logit(params, features, s);
      const double p_include = sigmoid(logit);
      const double action = labels.includes[s] ? 1.0 : 0.0;
      nll_sum += -(labels.includes[s] ? log_sigmoid(logit) : log_sigmoid(-logit));
      ++free_tokens;
      for (int j = 0; j < kSentenceFeatureDim; ++j)
        step.grad.include_weights[j] += (p_include - action) * features.sentence[s][j];
      if (labels.includes[s]) ++included;
    }
  }

  const double t = static_cast<double>(free_tokens);
  step.loss = nll_sum / t;
  for (double& g : step.grad.gate_weights) g /= t;
  for (double& g : step.grad.include_weights) g /= t;
  return step;
}

namespace {

struct SftExample {
  DocFeatures features;
  TeacherLabels labels;
};

}  // namespace

PolicyParams train_sft(const std::vector<RlInstance>& instances, const SftConfig& cfg,
                       std::vector<double>* epoch_losses) {
  std::vector<SftExample> examples;
  for (const RlInstance& inst : instances) {
    for (const Candidate& c : inst.candidates) {
      SftExample ex;
      ex.features = extract_features(inst.query, Document{c.doc_id, c.title, c.body},
                                     inst.term_idf);
      ex.labels = teacher_labels(ex.features, cfg.teacher_tau);
      examples.push_back(std::move(ex));
    }
  }
  PolicyParams params = PolicyParams::zeros();
  if (examples.empty()) return params;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng = derived_rng(cfg.seed, "sft-epoch:" + std::to_string(epoch));
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      SftStep step = sft_step(params, examples[idx].labels, examples[idx].features,
                              cfg.budget);
      loss_sum += step.loss;
      for (int j = 0; j < kGateFeatureDim; ++j)
        params.gate_weights[j] -= cfg.learning_rate * step.grad.gate_weights[j];
      for (int j = 0; j < kSentenceFeatureDim; ++j)
        params.include_weights[j] -= cfg.learning_rate * step.grad.include_weights[j];
    }
    if (epoch_losses != nullptr)
      epoch_losses->push_back(loss_sum / static_cast<double>(examples.size()));
  }
  if (!params.all_finite())
    throw NonFiniteGradient("sft produced non-finite parameters");
  return params;
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("grpo requires group size >= 2");
  if (clip_epsilon <= 0.0 || clip_epsilon >= 1.0)
    throw ConfigError("grpo clip epsilon must lie in (0, 1)");
  if (penalty_lambda < 0.0) throw ConfigError("grpo penalty lambda must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("grpo learning rate must be > 0");
  if (budget < 1) throw ConfigError("grpo sentence budget must be >= 1");
  window.validate();
}

std::vector<WindowItem> assemble_eval_list(const RlInstance& instance, int t,
                                           const std::string& rollout_text) {
  if (instance.background.size() != instance.candidates.size())
    throw InvariantViolation("instance " + instance.query.query_id +
                             " has no frozen background summaries");
  if (t < 0 || static_cast<std::size_t>(t) >= instance.background.size())
    throw IndexOutOfRange("target index " + std::to_string(t) + " outside list of " +
                          std::to_string(instance.background.size()));
  std::vector<WindowItem> items;
  items.reserve(instance.background.size());
  for (std::size_t i = 0; i < instance.background.size(); ++i) {
    WindowItem item;
    item.doc_id = instance.candidates[i].doc_id;
    if (static_cast<int>(i) == t) {
      item.text = rollout_text;
      item.is_safeguard = detect_safeguard(rollout_text);
    } else {
      item.text = instance.background[i].text;
      item.is_safeguard = instance.background[i].is_safeguard;
    }
    items.push_back(std::move(item));
  }
  return items;
}

double conditional_reward(double ndcg, bool target_positive, bool safeguard,
                          double lambda) {
  if (target_positive) return ndcg;
  if (safeguard) return 1.0;
  return ndcg - lambda;
}

namespace {

QrelsTable restricted_qrels(const RlInstance& instance) {
  QrelsTable table;
  for (const Candidate& c : instance.candidates)
    table.set(instance.query.query_id, c.doc_id, c.grade);
  return table;
}

}  // namespace

double compute_reward(const RlInstance& instance, int target_index, const Rollout& rollout,
                      RerankerBackend& reranker, const GrpoConfig& cfg) {
  std::vector<WindowItem> items = assemble_eval_list(instance, target_index, rollout.text);
  RankedList ranked = sliding_window_rerank(reranker, instance.query, std::move(items),
                                            cfg.window);
  QrelsTable qrels = restricted_qrels(instance);
  double ndcg = ndcg_at_k(ranked, qrels, cfg.reward_ndcg_k, GainMode::kLinear);
  const bool positive = instance.candidates[static_cast<std::size_t>(target_index)].label ==
                        CandidateLabel::kPositive;
  return conditional_reward(ndcg, positive, detect_safeguard(rollout.text),
                            cfg.penalty_lambda);
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards,
                                         double std_floor) {
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double variance = 0.0;
  for (double r : rewards) variance += (r - mean) * (r - mean);
  variance /= n;  // population variance
  const double sigma = std::sqrt(variance);
  std::vector<double> advantages(rewards.size(), 0.0);
  if (sigma < std_floor) return advantages;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    advantages[i] = (rewards[i] - mean) / sigma;
  return advantages;
}

namespace {

// Shared token walk for the GRPO objective and its gradient. For each free
// token of each rollout, calls
//   visit(rollout_index, free_token_count_of_rollout, is_gate, sentence,
//         action, x)
// where x is the feature vector for that token.
template <typename Visitor>
void walk_free_tokens(const std::vector<Rollout>& group, const DocFeatures& features,
                      int budget, Visitor&& visit) {
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Rollout& r = group[i];
    std::size_t free_tokens = 1;
    if (!r.rejected) {
      int included = 0;
      for (std::size_t s = 0; s < r.includes.size(); ++s) {
        if (included >= budget) break;
        ++free_tokens;
        if (r.includes[s]) ++included;
      }
    }
    visit(i, free_tokens, true, std::size_t{0}, !r.rejected, features.gate);
    if (r.rejected) continue;
    int included = 0;
    for (std::size_t s = 0; s < r.includes.size(); ++s) {
      if (included >= budget) break;
      visit(i, free_tokens, false, s, r.includes[s] != 0, features.sentence[s]);
      if (r.includes[s]) ++included;
    }
  }
}

struct TokenTerms {
  double ratio = 0.0;
  double surrogate = 0.0;      // min(ratio*A, clip(ratio)*A)
  double kl = 0.0;             // Bernoulli KL(theta || ref) at this state
  bool ratio_grad_flows = false;
  double d_surr_dlogit = 0.0;  // d(surrogate)/d(logit_new)
  double d_kl_dlogit = 0.0;    // d(kl)/d(logit_new)
};

TokenTerms token_terms(double logit_new, double logit_old, double logit_ref, bool action,
                       double advantage, double clip_epsilon) {
  TokenTerms t;
  const double lp_new = action ? log_sigmoid(logit_new) : log_sigmoid(-logit_new);
  const double lp_old = action ? log_sigmoid(logit_old) : log_sigmoid(-logit_old);
  t.ratio = std::exp(lp_new - lp_old);
  const double clipped =
      std::clamp(t.ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  const double unclipped_value = t.ratio * advantage;
  const double clipped_value = clipped * advantage;
  t.surrogate = std::min(unclipped_value, clipped_value);
  t.ratio_grad_flows = unclipped_value <= clipped_value;

  const double p = sigmoid(logit_new);
  // d(log pi(a)) / d(logit) = a - p  for a Bernoulli in logit space.
  const double dlp = (action ? 1.0 : 0.0) - p;
  if (t.ratio_grad_flows) t.d_surr_dlogit = advantage * t.ratio * dlp;

  const double log_p_new = log_sigmoid(logit_new);
  const double log_np_new = log_sigmoid(-logit_new);
  const double log_p_ref = log_sigmoid(logit_ref);
  const double log_np_ref = log_sigmoid(-logit_ref);
  t.kl = p * (log_p_new - log_p_ref) + (1.0 - p) * (log_np_new - log_np_ref);
  t.d_kl_dlogit = ((log_p_new - log_p_ref) - (log_np_new - log_np_ref)) * p * (1.0 - p);
  return t;
}

struct GrpoEvaluation {
  double surrogate = 0.0;
  double kl = 0.0;
  PolicyParams grad;  // of surrogate - beta*KL
  std::size_t clipped_tokens = 0;
  std::size_t total_tokens = 0;
};

GrpoEvaluation evaluate_grpo(const PolicyParams& params, const PolicyParams& ref_params,
                             const PolicyParams& old_params,
                             const std::vector<Rollout>& group,
                             const std::vector<double>& advantages,
                             const DocFeatures& features, const GrpoConfig& cfg,
                             bool with_grad) {
  GrpoEvaluation ev;
  ev.grad = PolicyParams::zeros();
  const double inv_g = 1.0 / static_cast<double>(group.size());
  walk_free_tokens(
      group, features, cfg.budget,
      [&](std::size_t i, std::size_t free_tokens, bool is_gate, std::size_t s, bool action,
          const std::vector<double>& x) {
        const double logit_new = is_gate ? gate_logit(params, features)
                                         : include_logit(params, features, s);
        const double logit_old = is_gate ? gate_logit(old_params, features)
                                         : include_logit(old_params, features, s);
        const double logit_ref = is_gate ? gate_logit(ref_params, features)
                                         : include_logit(ref_params, features, s);
        TokenTerms t = token_terms(logit_new, logit_old, logit_ref, action, advantages[i],
                                   cfg.clip_epsilon);
        const double weight = inv_g / static_cast<double>(free_tokens);
        ev.surrogate += weight * t.surrogate;
        ev.kl += weight * t.kl;
        ++ev.total_tokens;
        if (t.ratio < 1.0 - cfg.clip_epsilon || t.ratio > 1.0 + cfg.clip_epsilon)
          ++ev.clipped_tokens;
        if (with_grad) {
          const double dlogit = weight * (t.d_surr_dlogit - cfg.kl_beta * t.d_kl_dlogit);
          std::vector<double>& target =
              is_gate ? ev.grad.gate_weights : ev.grad.include_weights;
          for (std::size_t j = 0; j < x.size(); ++j) target[j] += dlogit * x[j];
        }
      });
  return ev;
}

std::string dump_params(const PolicyParams& p) {
  std::ostringstream out;
  out << "gate=[";
  for (std::size_t i = 0; i < p.gate_weights.size(); ++i)
    out << (i ? "," : "") << p.gate_weights[i];
  out << "] include=[";
  for (std::size_t i = 0; i < p.include_weights.size(); ++i)
    out << (i ? "," : "") << p.include_weights[i];
  out << "]";
  return out.str();
}

}  // namespace

double grpo_objective(const PolicyParams& params, const PolicyParams& ref_params,
                      const PolicyParams& old_params, const std::vector<Rollout>& group,
                      const std::vector<double>& advantages, const DocFeatures& features,
                      const GrpoConfig& cfg) {
  GrpoEvaluation ev = evaluate_grpo(params, ref_params, old_params, group, advantages,
                                    features, cfg, /*with_grad=*/false);
  return ev.surrogate - cfg.kl_beta * ev.kl;
}

GrpoStepStats grpo_step(PolicyParams& params, const PolicyParams& ref_params,
                        const PolicyParams& old_params, const std::vector<Rollout>& group,
                        const std::vector<double>& advantages, const DocFeatures& features,
                        const GrpoConfig& cfg) {
  cfg.validate();
  if (group.size() != advantages.size())
    throw InvariantViolation("grpo_step requires one advantage per rollout");
  GrpoEvaluation ev = evaluate_grpo(params, ref_params, old_params, group, advantages,
                                    features, cfg, /*with_grad=*/true);
  if (!ev.grad.all_finite())
    throw NonFiniteGradient("grpo gradient is not finite; params " + dump_params(params) +
                            "; grad " + dump_params(ev.grad));
  for (int j = 0; j < kGateFeatureDim; ++j)
    params.gate_weights[j] += cfg.learning_rate * ev.grad.gate_weights[j];
  for (int j = 0; j < kSentenceFeatureDim; ++j)
    params.include_weights[j] += cfg.learning_rate * ev.grad.include_weights[j];
  if (!params.all_finite())
    throw NonFiniteGradient("grpo update produced non-finite params: " +
                            dump_params(params));
  GrpoStepStats stats;
  stats.surrogate = ev.surrogate;
  stats.kl = ev.kl;
  stats.objective = ev.surrogate - cfg.kl_beta * ev.kl;
  stats.clip_fraction = ev.total_tokens == 0
                            ? 0.0
                            : static_cast<double>(ev.clipped_tokens) /
                                  static_cast<double>(ev.total_tokens);
  return stats;
}

PolicyEval evaluate_policy(const PolicyParams& params,
                           const std::vector<RlInstance>& instances,
                           const GrpoConfig& cfg) {
  PolicyEval eval;
  if (instances.empty()) return eval;
  double ndcg_sum = 0.0;
  std::size_t negatives = 0, safeguarded = 0;
  for (const RlInstance& inst : instances) {
    LexicalOverlapBackend reranker(inst.term_idf);
    std::vector<WindowItem> items;
    items.reserve(inst.candidates.size());
    for (const Candidate& c : inst.candidates) {
      DocFeatures features =
          extract_features(inst.query, Document{c.doc_id, c.title, c.body}, inst.term_idf);
      Rollout rollout = greedy_decode(params, features, c.doc_id, cfg.budget);
      std::string text = rollout.text.empty() ? std::string(kSafeguardPhrase) : rollout.text;
      bool safeguard = detect_safeguard(text);
      if (c.label == CandidateLabel::kNegative) {
        ++negatives;
        if (safeguard) ++safeguarded;
      }
      items.push_back(WindowItem{c.doc_id, std::move(text), safeguard});
    }
    RankedList ranked = sliding_window_rerank(reranker, inst.query, std::move(items),
                                              cfg.window);
    QrelsTable qrels = restricted_qrels(inst);
    ndcg_sum += ndcg_at_k(ranked, qrels, cfg.reward_ndcg_k, GainMode::kLinear);
  }
  eval.mean_ndcg10 = ndcg_sum / static_cast<double>(instances.size());
  eval.safeguard_rate_negatives =
      negatives == 0 ? 0.0 : static_cast<double>(safeguarded) / static_cast<double>(negatives);
  return eval;
}

GrpoTrainResult train_grpo(std::vector<RlInstance>& train_instances,
                           const std::vector<RlInstance>& heldout_instances,
                           const PolicyParams& sft_params, const GrpoConfig& cfg) {
  cfg.validate();
  for (RlInstance& inst : train_instances) {
    if (inst.background.empty()) {
      ToySummarizer sft_backend(sft_params, inst.term_idf, cfg.budget);
      build_background_summaries(inst, sft_backend);
    }
    if (inst.background.size() != inst.candidates.size())
      throw InvariantViolation("instance " + inst.query.query_id +
                               " background misaligned with candidates");
  }

  GrpoTrainResult result;
  result.params = sft_params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double reward_sum = 0.0, kl_sum = 0.0, clip_sum = 0.0;
    std::size_t reward_count = 0, step_count = 0;
    for (RlInstance& inst : train_instances) {
      std::vector<std::size_t> positives = inst.indices_with_label(CandidateLabel::kPositive);
      std::vector<std::size_t> negatives = inst.indices_with_label(CandidateLabel::kNegative);
      std::mt19937_64 target_rng = derived_rng(
          cfg.seed, "target:" + inst.query.query_id + ":" + std::to_string(epoch));
      // One positive and one negative target per query per epoch.
      const std::size_t targets[2] = {
          positives[uniform_below(target_rng, positives.size())],
          negatives[uniform_below(target_rng, negatives.size())]};
      LexicalOverlapBackend reranker(inst.term_idf);
      for (std::size_t t : targets) {
        const Candidate& target = inst.candidates[t];
        DocFeatures features = extract_features(
            inst.query, Document{target.doc_id, target.title, target.body}, inst.term_idf);
        PolicyParams old_params = result.params;  // sampling-time snapshot
        const std::uint64_t group_seed =
            fnv1a64(inst.query.query_id + ":" + std::to_string(epoch) + ":" +
                        std::to_string(t),
                    cfg.seed ^ 0x5851f42d4c957f2dull);
        std::vector<Rollout> group = sample_rollouts(
            old_params, features, target.doc_id, cfg.budget, cfg.group_size, group_seed);
        std::vector<double> rewards;
        rewards.reserve(group.size());
        for (const Rollout& rollout : group)
          rewards.push_back(compute_reward(inst, static_cast<int>(t), rollout, reranker,
                                           cfg));
        std::vector<double> advantages =
            normalize_advantages(rewards, cfg.advantage_std_floor);
        GrpoStepStats stats = grpo_step(result.params, sft_params, old_params, group,
                                        advantages, features, cfg);
        for (double r : rewards) reward_sum += r;
        reward_count += rewards.size();
        kl_sum += stats.kl;
        clip_sum += stats.clip_fraction;
        ++step_count;
      }
    }
    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.mean_reward = reward_count == 0 ? 0.0 : reward_sum / static_cast<double>(reward_count);
    metrics.mean_kl = step_count == 0 ? 0.0 : kl_sum / static_cast<double>(step_count);
    metrics.clip_fraction = step_count == 0 ? 0.0 : clip_sum / static_cast<double>(step_count);
    PolicyEval heldout = evaluate_policy(result.params, heldout_instances, cfg);
    metrics.heldout_ndcg10 = heldout.mean_ndcg10;
    metrics.heldout_safeguard_rate = heldout.safeguard_rate_negatives;
    result.log.push_back(metrics);
  }
  return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open metrics csv: " + path);
  out << "epoch,mean_reward,mean_kl,clip_fraction,heldout_ndcg10\n";
  char line[256];
  for (const EpochMetrics& m : log) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g\n", m.epoch, m.mean_reward,
                  m.mean_kl, m.clip_fraction, m.heldout_ndcg10);
    out << line;
  }
  if (!out) throw IoFailure("metrics csv write failed: " + path);
}

}  // namespace strank
