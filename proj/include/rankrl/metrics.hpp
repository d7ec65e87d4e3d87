#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/rng.hpp"

namespace rankrl {

// DCG gain convention for continuous signals. Linear uses the raw gain;
// Exponential uses 2^g - 1 (classic graded-relevance form).
enum class GainKind { Linear, Exponential };

double apply_gain(GainKind kind, double g);

// 1/log2(rank+1) for 1-based rank within the cutoff, 0 beyond it.
double dcg_discount(std::size_t rank, std::size_t cutoff);

// Exchanges 1-based positions k < j; the input is left untouched.
Ranking swap_ranking(const Ranking& y, std::size_t k, std::size_t j);

// NDCG@K with the table's gains. All-zero gains (IDCG == 0) evaluate to 1
// so degenerate contexts contribute a neutral reward.
double sequence_reward(const Ranking& y, const RelevanceTable& rel, std::size_t cutoff,
                       GainKind gain = GainKind::Linear);

// Precomputed per-(context, cutoff) quantities shared by the swap-reward
// loops: transformed gain per ranked position, discounts, and IDCG.
struct DcgCache {
  DcgCache(const Ranking& y, const RelevanceTable& rel, std::size_t cutoff,
           GainKind gain = GainKind::Linear);

  std::vector<double> gains;      // by 1-based rank, index 0 unused
  std::vector<double> discounts;  // by 1-based rank, 0 beyond cutoff
  double idcg = 0.0;
  double base_dcg = 0.0;
  std::size_t length = 0;
  std::size_t cutoff = 0;

  double base_ndcg() const { return idcg > 0.0 ? base_dcg / idcg : 1.0; }
};

struct MetricOptions {
  GainKind gain = GainKind::Linear;
  // An item is "relevant" when its gain exceeds this threshold; by default
  // the threshold is the per-context median gain.
  bool use_median_threshold = true;
  double absolute_threshold = 0.0;
};

MetricReport compute_metrics(const Ranking& y, const RelevanceTable& rel,
                             const MetricOptions& opt = {});

std::string metric_report_csv_header();
std::string metric_report_csv_row(const MetricReport& r);

struct PadResult {
  Ranking ranking;
  int n_invalid = 0;  // non-candidate or duplicate entries dropped
};

// Completes a partial ranking: invalid entries are dropped (and counted),
// then the missing candidates are appended in a uniformly shuffled order.
PadResult pad_invalid(const Ranking& partial, const Context& ctx, Rng& rng);

}  // namespace rankrl
