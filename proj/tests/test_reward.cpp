#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rankrl/reward.hpp"
#include "rankrl/rng.hpp"

using namespace rankrl;

namespace {

Ranking make_ranking(std::vector<ItemId> items) {
  Ranking y;
  y.items = std::move(items);
  return y;
}

struct Instance {
  Ranking y;
  RelevanceTable rel;
};

Instance random_instance(Rng& rng, int k) {
  std::vector<std::pair<ItemId, double>> gains;
  std::vector<ItemId> items;
  for (int i = 0; i < k; ++i) {
    gains.emplace_back(i + 1, rng.uniform());
    items.push_back(i + 1);
  }
  rng.shuffle(items);
  return {make_ranking(std::move(items)), RelevanceTable(std::move(gains))};
}

Instance ideal_instance(Rng& rng, int k) {
  std::vector<std::pair<ItemId, double>> gains;
  std::vector<double> g(k);
  for (int i = 0; i < k; ++i) g[i] = rng.uniform();
  std::sort(g.begin(), g.end(), std::greater<double>());
  std::vector<ItemId> items;
  for (int i = 0; i < k; ++i) {
    gains.emplace_back(i + 1, g[i]);
    items.push_back(i + 1);
  }
  return {make_ranking(std::move(items)), RelevanceTable(std::move(gains))};
}

}  // namespace

TEST_CASE("delta_swap matches hand NDCG arithmetic on the (3,2,1) example") {
  const RelevanceTable rel({{1, 3.0}, {2, 2.0}, {3, 1.0}});
  const Ranking ideal = make_ranking({1, 2, 3});
  CHECK(delta_swap(ideal, rel, 1, 2, 3) == doctest::Approx(-0.0775053).epsilon(1e-5));
  CHECK(delta_swap(ideal, rel, 1, 3, 3) == doctest::Approx(-0.2100016).epsilon(1e-5));
  CHECK(delta_swap(ideal, rel, 1, 2, 3) ==
        doctest::Approx(0.9224947 - 1.0).epsilon(1e-6));
  CHECK(delta_swap(ideal, rel, 1, 3, 3) ==
        doctest::Approx(0.7899984 - 1.0).epsilon(1e-6));
}

TEST_CASE("delta_swap is zero when all gains are equal") {
  const RelevanceTable rel({{1, 2.0}, {2, 2.0}, {3, 2.0}, {4, 2.0}});
  const Ranking y = make_ranking({3, 1, 4, 2});
  for (std::size_t k = 1; k <= 3; ++k)
    for (std::size_t j = k + 1; j <= 4; ++j) CHECK(delta_swap(y, rel, k, j, 4) == 0.0);
}

TEST_CASE("delta_swap agrees with full sequence_reward recomputation") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_below(7));
    const Instance inst = random_instance(rng, k);
    const std::size_t a = 1 + rng.uniform_below(k - 1);
    const std::size_t b = a + 1 + rng.uniform_below(k - a);
    const double base = sequence_reward(inst.y, inst.rel, k);
    const double swapped = sequence_reward(swap_ranking(inst.y, a, b), inst.rel, k);
    CHECK(delta_swap(inst.y, inst.rel, a, b, k) ==
          doctest::Approx(swapped - base).epsilon(1e-12));
  }
}

TEST_CASE("causal swap rewards on the worked (3,2,1) example") {
  const RelevanceTable rel({{1, 3.0}, {2, 2.0}, {3, 1.0}});
  const ItemRewardVector r = causal_swap_reward(make_ranking({1, 2, 3}), rel, 3);
  REQUIRE(r.per_rank.size() == 3);
  CHECK(r.per_rank[0] == doctest::Approx(0.1437534).epsilon(1e-5));
  CHECK(r.per_rank[1] == doctest::Approx(0.0274962).epsilon(1e-5));
  CHECK(r.per_rank[2] == 0.0);
}

TEST_CASE("all-equal gains yield all-zero swap rewards") {
  const RelevanceTable rel({{1, 1.5}, {2, 1.5}, {3, 1.5}});
  const Ranking y = make_ranking({2, 3, 1});
  for (double v : causal_swap_reward(y, rel, 3).per_rank) CHECK(v == 0.0);
  for (double v : noncausal_swap_reward(y, rel, 3).per_rank) CHECK(v == 0.0);
}

TEST_CASE("causal rewards equal the enumeration reference to 1e-12") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_below(7));
    const Instance inst = random_instance(rng, k);
    const ItemRewardVector fast = causal_swap_reward(inst.y, inst.rel, k);
    const ItemRewardVector ref = causal_swap_reward_reference(inst.y, inst.rel, k);
    REQUIRE(fast.per_rank.size() == ref.per_rank.size());
    for (std::size_t i = 0; i < fast.per_rank.size(); ++i)
      CHECK(fast.per_rank[i] == doctest::Approx(ref.per_rank[i]).epsilon(1e-12));
  }
}

TEST_CASE("ideal-order causal rewards are nonnegative at every rank") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance inst = ideal_instance(rng, 8);
    const ItemRewardVector r = causal_swap_reward(inst.y, inst.rel, 8);
    for (double v : r.per_rank) CHECK(v >= -1e-12);
  }
}

TEST_CASE("reversed-order rank-1 causal reward is nonpositive") {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    Instance inst = ideal_instance(rng, 8);
    std::reverse(inst.y.items.begin(), inst.y.items.end());
    const ItemRewardVector r = causal_swap_reward(inst.y, inst.rel, 8);
    CHECK(r.per_rank[0] <= 1e-12);
  }
}

TEST_CASE("swap evaluation count is exactly K(K-1)/2 beyond the base") {
  Rng rng(47);
  for (int k : {2, 4, 8, 12}) {
    const Instance inst = random_instance(rng, k);
    EvalCounter fast_counter;
    causal_swap_reward(inst.y, inst.rel, k, GainKind::Linear, &fast_counter);
    CHECK(fast_counter.swap_evals == static_cast<std::uint64_t>(k) * (k - 1) / 2);

    EvalCounter ref_counter;
    causal_swap_reward_reference(inst.y, inst.rel, k, GainKind::Linear, &ref_counter);
    CHECK(ref_counter.swap_evals == static_cast<std::uint64_t>(k) * (k - 1) / 2);
    // one sequence_reward call per swap plus the base evaluation
    CHECK(ref_counter.sequence_reward_calls == ref_counter.swap_evals + 1);
  }
}

TEST_CASE("noncausal K=2 gives both ranks the negated single delta") {
  const RelevanceTable rel({{1, 2.0}, {2, 0.5}});
  const Ranking y = make_ranking({2, 1});
  const double delta = delta_swap(y, rel, 1, 2, 2);
  const ItemRewardVector r = noncausal_swap_reward(y, rel, 2);
  CHECK(r.per_rank[0] == doctest::Approx(-delta).epsilon(1e-12));
  CHECK(r.per_rank[1] == doctest::Approx(-delta).epsilon(1e-12));
}

TEST_CASE("noncausal K=1 degenerates to zero") {
  const RelevanceTable rel({{1, 2.0}});
  const ItemRewardVector r = noncausal_swap_reward(make_ranking({1}), rel, 1);
  REQUIRE(r.per_rank.size() == 1);
  CHECK(r.per_rank[0] == 0.0);
}

TEST_CASE("noncausal last rank is positive on an ideal list, unlike causal") {
  const RelevanceTable rel({{1, 3.0}, {2, 2.0}, {3, 1.0}});
  const Ranking ideal = make_ranking({1, 2, 3});
  const ItemRewardVector nc = noncausal_swap_reward(ideal, rel, 3);
  CHECK(nc.per_rank[2] > 0.0);  // swapping rank 3 with ranks 1, 2 only hurts
  const ItemRewardVector c = causal_swap_reward(ideal, rel, 3);
  CHECK(c.per_rank[2] == 0.0);
}

TEST_CASE("noncausal rewards match their enumeration reference") {
  Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_below(6));
    const Instance inst = random_instance(rng, k);
    const ItemRewardVector fast = noncausal_swap_reward(inst.y, inst.rel, k);
    const ItemRewardVector ref = noncausal_swap_reward_reference(inst.y, inst.rel, k);
    for (std::size_t i = 0; i < fast.per_rank.size(); ++i)
      CHECK(fast.per_rank[i] == doctest::Approx(ref.per_rank[i]).epsilon(1e-12));
  }
}

TEST_CASE("independent contribution on the worked example") {
  const RelevanceTable rel({{1, 3.0}, {2, 2.0}, {3, 1.0}});
  const ItemRewardVector r = independent_contribution_reward(make_ranking({1, 2, 3}), rel, 3);
  const double idcg = 3.0 + 2.0 / std::log2(3.0) + 0.5;
  CHECK(r.per_rank[0] == doctest::Approx(3.0 / idcg).epsilon(1e-12));
  CHECK(r.per_rank[1] == doctest::Approx((2.0 / std::log2(3.0)) / idcg).epsilon(1e-12));
  CHECK(r.per_rank[2] == doctest::Approx(0.5 / idcg).epsilon(1e-12));
  CHECK(r.per_rank[0] == doctest::Approx(0.6300).epsilon(1e-3));
  CHECK(r.per_rank[1] == doctest::Approx(0.2650).epsilon(1e-3));
  CHECK(r.per_rank[2] == doctest::Approx(0.1050).epsilon(1e-3));
}

TEST_CASE("independent contribution is zero on all-zero gains") {
  const RelevanceTable rel({{1, 0.0}, {2, 0.0}, {3, 0.0}});
  for (double v : independent_contribution_reward(make_ranking({2, 1, 3}), rel, 3).per_rank)
    CHECK(v == 0.0);
}

TEST_CASE("independent contributions sum to the sequence reward") {
  Rng rng(59);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_below(7));
    const Instance inst = random_instance(rng, k);
    const std::size_t cut = 1 + rng.uniform_below(k);
    const ItemRewardVector r = independent_contribution_reward(inst.y, inst.rel, cut);
    double sum = 0.0;
    for (double v : r.per_rank) sum += v;
    CHECK(sum == doctest::Approx(sequence_reward(inst.y, inst.rel, cut)).epsilon(1e-12));
  }
}

TEST_CASE("reward vectors are invariant to relabeling items") {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 5;
    const Instance inst = random_instance(rng, k);
    // relabel item i -> i + 100 in both the table and the ranking
    std::vector<std::pair<ItemId, double>> gains2;
    for (const auto& [id, g] : inst.rel.entries()) gains2.emplace_back(id + 100, g);
    Ranking y2 = inst.y;
    for (ItemId& id : y2.items) id += 100;
    const RelevanceTable rel2(std::move(gains2));

    for (auto variant : {RewardVariant::CausalSwap, RewardVariant::NonCausalSwap,
                         RewardVariant::IndependentContribution}) {
      const auto a = compute_item_rewards(variant, inst.y, inst.rel, k);
      const auto b = compute_item_rewards(variant, y2, rel2, k);
      for (std::size_t i = 0; i < a.per_rank.size(); ++i)
        CHECK(a.per_rank[i] == doctest::Approx(b.per_rank[i]).epsilon(1e-15));
    }
  }
}

TEST_CASE("batch kernel matches the scalar path") {
  Rng rng(67);
  const int k = 10;
  std::vector<std::pair<ItemId, double>> gains;
  std::vector<ItemId> items;
  for (int i = 0; i < k; ++i) {
    gains.emplace_back(i + 1, rng.uniform());
    items.push_back(i + 1);
  }
  const RelevanceTable rel(std::move(gains));
  std::vector<Ranking> group;
  for (int g = 0; g < 16; ++g) {
    auto copy = items;
    rng.shuffle(copy);
    group.push_back(make_ranking(copy));
  }
  const auto batch = compute_item_rewards_batch(RewardVariant::CausalSwap, group, rel, k);
  for (std::size_t g = 0; g < group.size(); ++g) {
    const auto solo = causal_swap_reward(group[g], rel, k);
    CHECK(batch[g].per_rank == solo.per_rank);
  }
}
