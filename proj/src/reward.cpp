#include "rankrl/reward.hpp"

#include <stdexcept>

#include "rankrl/parallel.hpp"

namespace rankrl {

namespace {

void check_pair(const Ranking& y, std::size_t k, std::size_t j) {
  if (k < 1 || j > y.items.size()) throw std::out_of_range("swap delta: index out of range");
  if (k >= j) throw std::invalid_argument("swap delta: requires k < j");
}

// Swapping ranks k<j only moves two gains between two discounts, so the
// NDCG delta is (g_j - g_k) * (disc_k - disc_j) / IDCG.
double delta_from_cache(const DcgCache& c, std::size_t k, std::size_t j) {
  if (c.idcg <= 0.0) return 0.0;  // NDCG is 1 on both sides by convention
  return (c.gains[j] - c.gains[k]) * (c.discounts[k] - c.discounts[j]) / c.idcg;
}

}  // namespace

double delta_swap(const Ranking& y, const RelevanceTable& rel, std::size_t k, std::size_t j,
                  std::size_t cutoff, GainKind gain) {
  check_pair(y, k, j);
  const DcgCache cache(y, rel, cutoff, gain);
  return delta_from_cache(cache, k, j);
}

ItemRewardVector causal_swap_reward(const Ranking& y, const RelevanceTable& rel,
                                    std::size_t cutoff, GainKind gain, EvalCounter* counter) {
  const std::size_t n = y.items.size();
  if (n == 0) throw std::invalid_argument("causal_swap_reward: empty ranking");
  const DcgCache cache(y, rel, cutoff, gain);

  ItemRewardVector out;
  out.variant = RewardVariant::CausalSwap;
  out.per_rank.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    double sum = 0.0;
    for (std::size_t j = k + 1; j <= n; ++j) {
      sum += delta_from_cache(cache, k, j);
      if (counter) ++counter->swap_evals;
    }
    out.per_rank[k - 1] = -sum / static_cast<double>(n - k);
  }
  // no remaining pool at the last rank; neutral reward
  out.per_rank[n - 1] = 0.0;
  return out;
}

ItemRewardVector noncausal_swap_reward(const Ranking& y, const RelevanceTable& rel,
                                       std::size_t cutoff, GainKind gain, EvalCounter* counter) {
  const std::size_t n = y.items.size();
  if (n == 0) throw std::invalid_argument("noncausal_swap_reward: empty ranking");
  ItemRewardVector out;
  out.variant = RewardVariant::NonCausalSwap;
  out.per_rank.assign(n, 0.0);
  if (n == 1) return out;

  const DcgCache cache(y, rel, cutoff, gain);
  for (std::size_t k = 1; k <= n; ++k) {
    double sum = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      if (j == k) continue;
      sum += delta_from_cache(cache, std::min(k, j), std::max(k, j));
      if (counter) ++counter->swap_evals;
    }
    out.per_rank[k - 1] = -sum / static_cast<double>(n - 1);
  }
  return out;
}

ItemRewardVector independent_contribution_reward(const Ranking& y, const RelevanceTable& rel,
                                                 std::size_t cutoff, GainKind gain) {
  const std::size_t n = y.items.size();
  if (n == 0) throw std::invalid_argument("independent_contribution_reward: empty ranking");
  const DcgCache cache(y, rel, cutoff, gain);
  ItemRewardVector out;
  out.variant = RewardVariant::IndependentContribution;
  out.per_rank.assign(n, 0.0);
  if (cache.idcg <= 0.0) return out;
  for (std::size_t k = 1; k <= n; ++k)
    out.per_rank[k - 1] = cache.gains[k] * cache.discounts[k] / cache.idcg;
  return out;
}

ItemRewardVector causal_swap_reward_reference(const Ranking& y, const RelevanceTable& rel,
                                              std::size_t cutoff, GainKind gain,
                                              EvalCounter* counter) {
  const std::size_t n = y.items.size();
  if (n == 0) throw std::invalid_argument("causal_swap_reward_reference: empty ranking");
  const double base = sequence_reward(y, rel, cutoff, gain);
  if (counter) ++counter->sequence_reward_calls;  // the base evaluation

  ItemRewardVector out;
  out.variant = RewardVariant::CausalSwap;
  out.per_rank.assign(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    double sum = 0.0;
    for (std::size_t j = k + 1; j <= n; ++j) {
      sum += sequence_reward(swap_ranking(y, k, j), rel, cutoff, gain) - base;
      if (counter) {
        ++counter->sequence_reward_calls;
        ++counter->swap_evals;
      }
    }
    out.per_rank[k - 1] = -sum / static_cast<double>(n - k);
  }
  out.per_rank[n - 1] = 0.0;
  return out;
}

ItemRewardVector noncausal_swap_reward_reference(const Ranking& y, const RelevanceTable& rel,
                                                 std::size_t cutoff, GainKind gain,
                                                 EvalCounter* counter) {
  const std::size_t n = y.items.size();
  if (n == 0) throw std::invalid_argument("noncausal_swap_reward_reference: empty ranking");
  ItemRewardVector out;
  out.variant = RewardVariant::NonCausalSwap;
  out.per_rank.assign(n, 0.0);
  if (n == 1) return out;

  const double base = sequence_reward(y, rel, cutoff, gain);
  if (counter) ++counter->sequence_reward_calls;
  for (std::size_t k = 1; k <= n; ++k) {
    double sum = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
      if (j == k) continue;
      const auto lo = std::min(k, j), hi = std::max(k, j);
      sum += sequence_reward(swap_ranking(y, lo, hi), rel, cutoff, gain) - base;
      if (counter) {
        ++counter->sequence_reward_calls;
        ++counter->swap_evals;
      }
    }
    out.per_rank[k - 1] = -sum / static_cast<double>(n - 1);
  }
  return out;
}

ItemRewardVector compute_item_rewards(RewardVariant variant, const Ranking& y,
                                      const RelevanceTable& rel, std::size_t cutoff,
                                      GainKind gain) {
  switch (variant) {
    case RewardVariant::CausalSwap:
      return causal_swap_reward(y, rel, cutoff, gain);
    case RewardVariant::NonCausalSwap:
      return noncausal_swap_reward(y, rel, cutoff, gain);
    case RewardVariant::IndependentContribution:
      return independent_contribution_reward(y, rel, cutoff, gain);
  }
  throw std::logic_error("compute_item_rewards: unknown variant");
}

std::vector<ItemRewardVector> compute_item_rewards_batch(RewardVariant variant,
                                                         const std::vector<Ranking>& group,
                                                         const RelevanceTable& rel,
                                                         std::size_t cutoff, GainKind gain) {
  std::vector<ItemRewardVector> out(group.size());
  parallel_for(group.size(), [&](std::size_t i) {
    out[i] = compute_item_rewards(variant, group[i], rel, cutoff, gain);
  });
  return out;
}

}  // namespace rankrl
