#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/metrics.hpp"

namespace rankrl {

enum class RewardVariant { CausalSwap, NonCausalSwap, IndependentContribution };

struct ItemRewardVector {
  std::vector<double> per_rank;  // length K, 1-based rank k stored at [k-1]
  RewardVariant variant = RewardVariant::CausalSwap;
};

// Counts listwise evaluations so tests can pin the O(K^2) budget.
struct EvalCounter {
  std::uint64_t swap_evals = 0;
  std::uint64_t sequence_reward_calls = 0;
};

// NDCG change from exchanging 1-based positions k < j, holding the rest of
// the list fixed.
double delta_swap(const Ranking& y, const RelevanceTable& rel, std::size_t k, std::size_t j,
                  std::size_t cutoff, GainKind gain = GainKind::Linear);

// Item-level reward: negated mean swap delta against the still-unplaced
// pool, r_k = -(1/(K-k)) * sum_{j>k} delta(k,j). The last rank has no
// remaining pool and is assigned 0. Swap deltas use incremental two-term
// DCG updates against a cached IDCG.
ItemRewardVector causal_swap_reward(const Ranking& y, const RelevanceTable& rel,
                                    std::size_t cutoff, GainKind gain = GainKind::Linear,
                                    EvalCounter* counter = nullptr);

// Ablation variant: averages swaps with every other position, including
// already-placed ones. K = 1 degenerates to reward 0.
ItemRewardVector noncausal_swap_reward(const Ranking& y, const RelevanceTable& rel,
                                       std::size_t cutoff, GainKind gain = GainKind::Linear,
                                       EvalCounter* counter = nullptr);

// Ablation variant: the item's own NDCG contribution, gain * discount / IDCG
// within the cutoff and 0 beyond it (0 everywhere when IDCG is 0).
ItemRewardVector independent_contribution_reward(const Ranking& y, const RelevanceTable& rel,
                                                 std::size_t cutoff,
                                                 GainKind gain = GainKind::Linear);

// Serial reference for the swap variants: every delta is a full
// sequence_reward recomputation. Kept independent of the incremental path
// so the two can be checked against each other.
ItemRewardVector causal_swap_reward_reference(const Ranking& y, const RelevanceTable& rel,
                                              std::size_t cutoff,
                                              GainKind gain = GainKind::Linear,
                                              EvalCounter* counter = nullptr);
ItemRewardVector noncausal_swap_reward_reference(const Ranking& y, const RelevanceTable& rel,
                                                 std::size_t cutoff,
                                                 GainKind gain = GainKind::Linear,
                                                 EvalCounter* counter = nullptr);

ItemRewardVector compute_item_rewards(RewardVariant variant, const Ranking& y,
                                      const RelevanceTable& rel, std::size_t cutoff,
                                      GainKind gain = GainKind::Linear);

// Batch kernel: item rewards for G rankings over one context, parallel
// across rollouts. Results are identical to calling the scalar form per
// rollout.
std::vector<ItemRewardVector> compute_item_rewards_batch(RewardVariant variant,
                                                         const std::vector<Ranking>& group,
                                                         const RelevanceTable& rel,
                                                         std::size_t cutoff,
                                                         GainKind gain = GainKind::Linear);

}  // namespace rankrl
