#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rankrl/policy.hpp"
#include "rankrl/reward.hpp"

namespace rankrl {

enum class AdvantageMode { ItemLevel, SequenceLevel };

constexpr double kAdvantageEps = 1e-8;
constexpr double kWeightEps = 1e-6;

// All G x K item rewards of a prompt group are pooled and standardized with
// shared statistics (population variance), so item advantages stay
// comparable across rollouts.
std::vector<std::vector<double>> item_advantages(
    const std::vector<std::vector<double>>& rewards, double eps = kAdvantageEps);

std::vector<double> seq_advantages(const std::vector<double>& rewards,
                                   double eps = kAdvantageEps);

// Inverse-variance weights, normalized by the group mean and clipped at 1.
std::vector<double> uncertainty_weights(const std::vector<double>& variances,
                                        double eps = kWeightEps);

// Sequence reward variance under additive aggregation, ignoring cross-item
// covariance: just the sum.
double aggregate_sequence_variance(std::span<const double> item_vars);

// One prompt group: G rollouts over a shared context with their rewards.
struct RolloutGroup {
  std::vector<Rollout> rollouts;
  std::vector<std::vector<double>> ref_logprobs;  // per rollout, K+1
  std::vector<std::vector<double>> old_logprobs;  // snapshot at sample time
  std::vector<std::vector<double>> item_rewards;  // G x K
  std::vector<double> seq_rewards;                // G
  std::vector<double> seq_variances;              // G, >= 0
  // optional per-item reward variances (G x K) for the per-item weighting mode
  std::vector<std::vector<double>> item_variances;

  std::size_t size() const { return rollouts.size(); }
};

struct AdvantageAssignment {
  std::vector<std::vector<double>> item_adv;  // G x K
  std::vector<double> seq_adv;                // G
  std::vector<double> weights;                // c_i, in (0, 1]
  std::vector<double> weighted_seq_adv;       // c_i * A_seq_i
  // per-step advantage actually assigned to tokens: G x (K+1), step 0 is
  // the strategy step
  std::vector<std::vector<double>> step_adv;
};

struct AdvantageOptions {
  AdvantageMode mode = AdvantageMode::ItemLevel;
  bool uncertainty = false;
  // optional extension: weight item advantages by per-item inverse-variance
  // weights (normalized over the pooled G x K variances); off by default
  bool item_uncertainty = false;
  double adv_eps = kAdvantageEps;
  double weight_eps = kWeightEps;
};

AdvantageAssignment assign_token_advantages(const RolloutGroup& group,
                                            const AdvantageOptions& opt);

struct GrpoOptions {
  double clip_ratio = 0.2;
  double kl_coeff = 0.01;
  double entropy_coeff = 0.005;
};

struct GrpoLoss {
  double loss = 0.0;       // full objective, entropy term included
  double surrogate = 0.0;  // clipped policy term alone
  double kl = 0.0;         // mean per-step KL estimate
  double entropy = 0.0;    // mean per-step entropy
  std::vector<double> grad;  // d loss / d theta
};

// Clipped-surrogate GRPO objective over one or more groups sharing a policy:
//   mean_steps[ -min(rho A, clip(rho) A) + kl_coeff * (e^d - d - 1) ] -
//   entropy_coeff * mean_steps[ H ],   d = ref_logprob - cur_logprob.
// Current log-probabilities and the gradient come from the policy's
// backward pass; `features[g]` must match each group's context.
GrpoLoss grpo_loss(const PolicyParams& params,
                   const std::vector<const RolloutGroup*>& groups,
                   const std::vector<const ContextFeatures*>& features,
                   const std::vector<const AdvantageAssignment*>& assignments,
                   const GrpoOptions& opt);

GrpoLoss grpo_loss(const PolicyParams& params, const RolloutGroup& group,
                   const ContextFeatures& features, const AdvantageAssignment& assignment,
                   const GrpoOptions& opt);

}  // namespace rankrl
