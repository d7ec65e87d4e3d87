#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "rankrl/metrics.hpp"
#include "rankrl/rng.hpp"

using namespace rankrl;

namespace {

Ranking make_ranking(std::vector<ItemId> items) {
  Ranking y;
  y.items = std::move(items);
  y.source_context = "test";
  return y;
}

RelevanceTable table(std::vector<std::pair<ItemId, double>> gains) {
  return RelevanceTable(std::move(gains));
}

Context toy_context(std::vector<ItemId> candidates) {
  Context ctx;
  ctx.user_id = 7;
  ctx.candidates = std::move(candidates);
  return ctx;
}

}  // namespace

TEST_CASE("swap exchanges exactly two positions") {
  const Ranking y = make_ranking({10, 20, 30});
  const Ranking s13 = swap_ranking(y, 1, 3);
  CHECK(s13.items == std::vector<ItemId>{30, 20, 10});
  const Ranking s23 = swap_ranking(y, 2, 3);
  CHECK(s23.items == std::vector<ItemId>{10, 30, 20});
  CHECK(y.items == std::vector<ItemId>{10, 20, 30});  // input untouched
}

TEST_CASE("swap rejects bad indices") {
  const Ranking y = make_ranking({1, 2, 3});
  CHECK_THROWS_AS(swap_ranking(y, 0, 2), std::out_of_range);
  CHECK_THROWS_AS(swap_ranking(y, 1, 4), std::out_of_range);
  CHECK_THROWS_AS(swap_ranking(y, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(swap_ranking(y, 3, 1), std::invalid_argument);
}

TEST_CASE("swap is an involution preserving the item multiset") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ItemId> items(8);
    for (int i = 0; i < 8; ++i) items[i] = i + 1;
    rng.shuffle(items);
    const Ranking y = make_ranking(items);
    const std::size_t k = 1 + rng.uniform_below(7);
    const std::size_t j = k + 1 + rng.uniform_below(8 - k);
    const Ranking twice = swap_ranking(swap_ranking(y, k, j), k, j);
    CHECK(twice.items == y.items);
    auto sorted = swap_ranking(y, k, j).items;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<ItemId>{1, 2, 3, 4, 5, 6, 7, 8});
  }
}

TEST_CASE("any permutation is reachable with at most K-1 swaps") {
  // constructive selection sort against full enumeration for K <= 6
  for (int k = 2; k <= 6; ++k) {
    std::vector<ItemId> target(k);
    for (int i = 0; i < k; ++i) target[i] = i + 1;
    std::vector<ItemId> perm = target;
    std::sort(perm.begin(), perm.end());
    do {
      Ranking y = make_ranking(perm);
      int swaps = 0;
      for (int pos = 0; pos < k; ++pos) {
        if (y.items[pos] == target[pos]) continue;
        const auto it = std::find(y.items.begin() + pos, y.items.end(), target[pos]);
        y = swap_ranking(y, pos + 1, (it - y.items.begin()) + 1);
        ++swaps;
      }
      CHECK(y.items == target);
      CHECK(swaps <= k - 1);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("sequence_reward matches hand NDCG arithmetic") {
  const RelevanceTable rel = table({{1, 3.0}, {2, 2.0}, {3, 1.0}});
  CHECK(sequence_reward(make_ranking({1, 2, 3}), rel, 3) == doctest::Approx(1.0).epsilon(1e-12));

  // DCG = 1/log2(2) + 2/log2(3) + 3/log2(4), IDCG = 3 + 2/log2(3) + 0.5
  const double dcg = 1.0 + 2.0 / std::log2(3.0) + 1.5;
  const double idcg = 3.0 + 2.0 / std::log2(3.0) + 0.5;
  CHECK(dcg == doctest::Approx(3.76186).epsilon(1e-5));
  CHECK(idcg == doctest::Approx(4.76186).epsilon(1e-5));
  CHECK(sequence_reward(make_ranking({3, 2, 1}), rel, 3) ==
        doctest::Approx(dcg / idcg).epsilon(1e-12));
  CHECK(sequence_reward(make_ranking({3, 2, 1}), rel, 3) ==
        doctest::Approx(0.78999).epsilon(1e-4));
}

TEST_CASE("all-zero gains score 1 by convention") {
  const RelevanceTable rel = table({{1, 0.0}, {2, 0.0}, {3, 0.0}});
  CHECK(sequence_reward(make_ranking({2, 3, 1}), rel, 3) == 1.0);
}

TEST_CASE("sequence_reward rejects an empty ranking") {
  const RelevanceTable rel = table({{1, 1.0}});
  CHECK_THROWS_AS(sequence_reward(make_ranking({}), rel, 3), std::invalid_argument);
}

TEST_CASE("ideal order scores exactly 1 for random gains") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_below(7));
    std::vector<std::pair<ItemId, double>> gains;
    for (int i = 0; i < k; ++i) gains.emplace_back(i + 1, rng.uniform());
    const RelevanceTable rel = table(gains);
    std::sort(gains.begin(), gains.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<ItemId> ideal;
    for (const auto& [id, g] : gains) ideal.push_back(id);
    CHECK(sequence_reward(make_ranking(ideal), rel, k) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("NDCG decomposes into per-item DCG contributions") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 3 + static_cast<int>(rng.uniform_below(6));
    std::vector<std::pair<ItemId, double>> gains;
    std::vector<ItemId> items;
    for (int i = 0; i < k; ++i) {
      gains.emplace_back(i + 1, rng.uniform());
      items.push_back(i + 1);
    }
    const RelevanceTable rel = table(gains);
    rng.shuffle(items);
    const Ranking y = make_ranking(items);
    const DcgCache cache(y, rel, k);
    double sum = 0.0;
    for (int r = 1; r <= k; ++r) sum += cache.gains[r] * cache.discounts[r] / cache.idcg;
    CHECK(sum == doctest::Approx(sequence_reward(y, rel, k)).epsilon(1e-12));
  }
}

TEST_CASE("exponential gain variant changes the scoring") {
  const RelevanceTable rel = table({{1, 3.0}, {2, 2.0}, {3, 1.0}});
  // worst-first order; transformed gains 2^g - 1 are 1, 3, 7 by rank
  const Ranking y = make_ranking({3, 2, 1});
  const double dcg = 1.0 + 3.0 / std::log2(3.0) + 7.0 / 2.0;
  const double idcg = 7.0 + 3.0 / std::log2(3.0) + 1.0 / 2.0;
  CHECK(sequence_reward(y, rel, 3, GainKind::Exponential) ==
        doctest::Approx(dcg / idcg).epsilon(1e-12));
  CHECK(sequence_reward(make_ranking({1, 2, 3}), rel, 3, GainKind::Exponential) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metric report on a single relevant item") {
  // 6 candidates, one high-gain item; median gain 0 -> only the high item
  // counts as relevant
  std::vector<std::pair<ItemId, double>> gains;
  for (int i = 1; i <= 6; ++i) gains.emplace_back(i, 0.0);
  gains[2].second = 5.0;  // item 3

  const RelevanceTable rel = table(gains);
  MetricReport top = compute_metrics(make_ranking({3, 1, 2, 4, 5, 6}), rel);
  CHECK(top.mrr5 == 1.0);
  CHECK(top.recall5 == 1.0);

  MetricReport outside = compute_metrics(make_ranking({1, 2, 4, 5, 6, 3}), rel);
  CHECK(outside.mrr5 == 0.0);
  CHECK(outside.recall5 == 0.0);
}

TEST_CASE("recall and precision against a counting oracle") {
  // 30 candidates; gains: two above the median band, the rest at 1
  std::vector<std::pair<ItemId, double>> gains;
  for (int i = 1; i <= 30; ++i) gains.emplace_back(i, 1.0);
  gains[0].second = 3.0;
  gains[1].second = 2.0;
  const RelevanceTable rel = table(gains);

  std::vector<ItemId> order;
  for (int i = 1; i <= 30; ++i) order.push_back(i);  // items 1,2 in top 5
  const MetricReport rep = compute_metrics(make_ranking(order), rel);

  // counting oracle
  const double median = 1.0;
  int total_rel = 0, hits = 0;
  for (int i = 0; i < 30; ++i) {
    const bool relevant = gains[i].second > median;
    total_rel += relevant;
    if (relevant && i < 5) ++hits;
  }
  CHECK(total_rel == 2);
  CHECK(rep.recall5 == doctest::Approx(static_cast<double>(hits) / total_rel));
  CHECK(rep.recall5 == 1.0);
  CHECK(rep.precision5 == doctest::Approx(hits / 5.0));
  CHECK(rep.precision5 == doctest::Approx(0.4));
}

TEST_CASE("metrics require at least 5 candidates") {
  const RelevanceTable rel = table({{1, 1.0}, {2, 0.0}, {3, 0.0}, {4, 0.0}});
  CHECK_THROWS_AS(compute_metrics(make_ranking({1, 2, 3, 4}), rel), std::invalid_argument);
}

TEST_CASE("metric report serializes to one CSV row") {
  MetricReport r;
  r.context_id = "u7";
  r.ndcg5 = 0.5;
  const std::string row = metric_report_csv_row(r);
  CHECK(row.substr(0, 3) == "u7,");
  CHECK(metric_report_csv_header() ==
        "context_id,ndcg5,ndcg10,ndcg30,recall5,mrr5,precision5,n_invalid_items");
}

TEST_CASE("pad_invalid leaves a full permutation unchanged") {
  const Context ctx = toy_context({1, 2, 3, 4});
  Rng rng(5);
  const PadResult r = pad_invalid(make_ranking({4, 2, 1, 3}), ctx, rng);
  CHECK(r.ranking.items == std::vector<ItemId>{4, 2, 1, 3});
  CHECK(r.n_invalid == 0);
}

TEST_CASE("pad_invalid on an empty prefix is a uniform permutation") {
  std::vector<ItemId> candidates;
  for (int i = 1; i <= 30; ++i) candidates.push_back(i);
  const Context ctx = toy_context(candidates);
  Rng rng(9);
  const PadResult r = pad_invalid(make_ranking({}), ctx, rng);
  CHECK(r.ranking.items.size() == 30);
  std::set<ItemId> seen(r.ranking.items.begin(), r.ranking.items.end());
  CHECK(seen.size() == 30);
}

TEST_CASE("pad_invalid completes a length-28 prefix with the 2 missing items") {
  std::vector<ItemId> candidates;
  for (int i = 1; i <= 30; ++i) candidates.push_back(i);
  const Context ctx = toy_context(candidates);

  std::vector<ItemId> prefix;
  for (int i = 1; i <= 28; ++i) prefix.push_back(i);  // 29, 30 missing

  std::set<std::vector<ItemId>> suffixes;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    Rng rng(seed);
    const PadResult r = pad_invalid(make_ranking(prefix), ctx, rng);
    CHECK(std::equal(prefix.begin(), prefix.end(), r.ranking.items.begin()));
    suffixes.insert({r.ranking.items[28], r.ranking.items[29]});

    Rng again(seed);
    const PadResult r2 = pad_invalid(make_ranking(prefix), ctx, again);
    CHECK(r2.ranking.items == r.ranking.items);  // seed determinism
  }
  // both orderings of the two missing items occur
  CHECK(suffixes.size() == 2);
  for (const auto& s : suffixes) {
    std::set<ItemId> expect{29, 30};
    CHECK(std::set<ItemId>(s.begin(), s.end()) == expect);
  }
}

TEST_CASE("pad_invalid drops non-candidates and duplicates, counting them") {
  const Context ctx = toy_context({1, 2, 3, 4, 5});
  Rng rng(3);
  const PadResult r = pad_invalid(make_ranking({2, 99, 2, 4}), ctx, rng);
  CHECK(r.n_invalid == 2);  // 99 and the duplicate 2
  CHECK(r.ranking.items.size() == 5);
  CHECK(r.ranking.items[0] == 2);
  CHECK(r.ranking.items[1] == 4);
  std::set<ItemId> seen(r.ranking.items.begin(), r.ranking.items.end());
  CHECK(seen == std::set<ItemId>{1, 2, 3, 4, 5});
}
