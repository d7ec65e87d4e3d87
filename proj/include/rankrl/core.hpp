#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankrl {

using ItemId = std::int64_t;
using UserId = std::int64_t;
using Timestamp = std::int64_t;

enum class SignalKind { WatchRatio, Rating };

enum class NeedVariant : int {
  MaxInterest = 0,
  NicheDiscovery = 1,
  TrendPromotion = 2,
  ProductSearch = 3,
};
constexpr int kNumNeeds = 4;

struct NeedKind {
  NeedVariant variant = NeedVariant::MaxInterest;
  double alpha_bonus = 0.5;        // niche bonus strength, > 0
  double alpha_blend = 0.7;        // trend blend, in (0,1)
  Timestamp window_seconds = 86400;  // trend window

  static NeedKind max_interest() { return {NeedVariant::MaxInterest, 0.5, 0.7, 86400}; }
  static NeedKind niche_discovery(double bonus = 0.5) {
    return {NeedVariant::NicheDiscovery, bonus, 0.7, 86400};
  }
  static NeedKind trend_promotion(double blend = 0.7, Timestamp window = 86400) {
    return {NeedVariant::TrendPromotion, 0.5, blend, window};
  }
  static NeedKind product_search() { return {NeedVariant::ProductSearch, 0.5, 0.7, 86400}; }
};

struct Interaction {
  ItemId item = 0;
  double signal = 0.0;
  Timestamp timestamp = 0;
};

// One ranking instance: a user, their recent history, the candidate pool to
// permute, and the active need.
struct Context {
  UserId user_id = 0;
  std::vector<Interaction> history;  // sorted ascending by timestamp
  std::vector<ItemId> candidates;    // distinct, length C
  NeedKind need;
  std::map<std::string, std::string> metadata;
  Timestamp query_time = 0;  // defaults to last history timestamp + 1

  std::string id() const { return "u" + std::to_string(user_id); }
};

// Per-context map item -> need-specific gain, stored sorted for
// deterministic iteration and O(log C) lookup.
class RelevanceTable {
 public:
  RelevanceTable() = default;
  explicit RelevanceTable(std::vector<std::pair<ItemId, double>> gains)
      : gains_(std::move(gains)) {
    std::sort(gains_.begin(), gains_.end());
    for (std::size_t i = 0; i + 1 < gains_.size(); ++i) {
      if (gains_[i].first == gains_[i + 1].first)
        throw std::invalid_argument("RelevanceTable: duplicate item id");
    }
  }

  double gain_of(ItemId item) const {
    auto it = std::lower_bound(
        gains_.begin(), gains_.end(), item,
        [](const std::pair<ItemId, double>& p, ItemId v) { return p.first < v; });
    if (it == gains_.end() || it->first != item)
      throw std::out_of_range("RelevanceTable: no gain for item " + std::to_string(item));
    return it->second;
  }

  bool contains(ItemId item) const {
    auto it = std::lower_bound(
        gains_.begin(), gains_.end(), item,
        [](const std::pair<ItemId, double>& p, ItemId v) { return p.first < v; });
    return it != gains_.end() && it->first == item;
  }

  const std::vector<std::pair<ItemId, double>>& entries() const { return gains_; }
  std::size_t size() const { return gains_.size(); }

 private:
  std::vector<std::pair<ItemId, double>> gains_;
};

// A (possibly partial) permutation of a context's candidate set.
struct Ranking {
  std::vector<ItemId> items;
  std::string source_context;

  std::size_t size() const { return items.size(); }
};

struct MetricReport {
  std::string context_id;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  double ndcg30 = 0.0;
  double recall5 = 0.0;
  double mrr5 = 0.0;
  double precision5 = 0.0;
  int n_invalid_items = 0;
};

}  // namespace rankrl
