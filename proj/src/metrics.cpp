#include "rankrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace rankrl {

double apply_gain(GainKind kind, double g) {
  return kind == GainKind::Linear ? g : std::exp2(g) - 1.0;
}

double dcg_discount(std::size_t rank, std::size_t cutoff) {
  if (rank == 0 || rank > cutoff) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

Ranking swap_ranking(const Ranking& y, std::size_t k, std::size_t j) {
  const std::size_t n = y.items.size();
  if (k < 1 || j > n) throw std::out_of_range("swap_ranking: index out of range");
  if (k >= j) throw std::invalid_argument("swap_ranking: requires k < j");
  Ranking out = y;
  std::swap(out.items[k - 1], out.items[j - 1]);
  return out;
}

namespace {

// IDCG over the top-`cutoff` gains in descending order.
double ideal_dcg(std::vector<double> gains, std::size_t cutoff) {
  std::sort(gains.begin(), gains.end(), std::greater<double>());
  double idcg = 0.0;
  const std::size_t top = std::min(cutoff, gains.size());
  for (std::size_t r = 1; r <= top; ++r) idcg += gains[r - 1] * dcg_discount(r, cutoff);
  return idcg;
}

}  // namespace

double sequence_reward(const Ranking& y, const RelevanceTable& rel, std::size_t cutoff,
                       GainKind gain) {
  const std::size_t n = y.items.size();
  if (n == 0) throw std::invalid_argument("sequence_reward: empty ranking");
  if (cutoff == 0) throw std::invalid_argument("sequence_reward: zero cutoff");
  cutoff = std::min(cutoff, n);

  std::vector<double> gains(n);
  for (std::size_t i = 0; i < n; ++i) gains[i] = apply_gain(gain, rel.gain_of(y.items[i]));

  double dcg = 0.0;
  for (std::size_t r = 1; r <= cutoff; ++r) dcg += gains[r - 1] * dcg_discount(r, cutoff);
  const double idcg = ideal_dcg(gains, cutoff);
  if (idcg <= 0.0) return 1.0;
  return dcg / idcg;
}

DcgCache::DcgCache(const Ranking& y, const RelevanceTable& rel, std::size_t cut, GainKind gain) {
  length = y.items.size();
  if (length == 0) throw std::invalid_argument("DcgCache: empty ranking");
  cutoff = std::min(cut == 0 ? length : cut, length);
  gains.assign(length + 1, 0.0);
  discounts.assign(length + 1, 0.0);
  std::vector<double> raw(length);
  for (std::size_t r = 1; r <= length; ++r) {
    raw[r - 1] = apply_gain(gain, rel.gain_of(y.items[r - 1]));
    gains[r] = raw[r - 1];
    discounts[r] = dcg_discount(r, cutoff);
    base_dcg += gains[r] * discounts[r];
  }
  idcg = ideal_dcg(raw, cutoff);
}

MetricReport compute_metrics(const Ranking& y, const RelevanceTable& rel,
                             const MetricOptions& opt) {
  const std::size_t n = y.items.size();
  if (n < 5) throw std::invalid_argument("compute_metrics: fewer than 5 candidates");

  MetricReport rep;
  rep.context_id = y.source_context;
  rep.ndcg5 = sequence_reward(y, rel, 5, opt.gain);
  rep.ndcg10 = sequence_reward(y, rel, 10, opt.gain);
  rep.ndcg30 = sequence_reward(y, rel, 30, opt.gain);

  double threshold = opt.absolute_threshold;
  if (opt.use_median_threshold) {
    std::vector<double> gains(n);
    for (std::size_t i = 0; i < n; ++i) gains[i] = rel.gain_of(y.items[i]);
    std::sort(gains.begin(), gains.end());
    threshold = (n % 2 == 1) ? gains[n / 2] : 0.5 * (gains[n / 2 - 1] + gains[n / 2]);
  }

  std::size_t total_relevant = 0;
  for (ItemId item : y.items)
    if (rel.gain_of(item) > threshold) ++total_relevant;

  std::size_t hits = 0;
  double mrr = 0.0;
  const std::size_t top = std::min<std::size_t>(5, n);
  for (std::size_t r = 1; r <= top; ++r) {
    if (rel.gain_of(y.items[r - 1]) > threshold) {
      ++hits;
      if (mrr == 0.0) mrr = 1.0 / static_cast<double>(r);
    }
  }
  rep.recall5 = total_relevant > 0 ? static_cast<double>(hits) / static_cast<double>(total_relevant) : 0.0;
  rep.precision5 = static_cast<double>(hits) / 5.0;
  rep.mrr5 = mrr;
  return rep;
}

std::string metric_report_csv_header() {
  return "context_id,ndcg5,ndcg10,ndcg30,recall5,mrr5,precision5,n_invalid_items";
}

std::string metric_report_csv_row(const MetricReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d",
                r.context_id.c_str(), r.ndcg5, r.ndcg10, r.ndcg30, r.recall5, r.mrr5,
                r.precision5, r.n_invalid_items);
  return buf;
}

PadResult pad_invalid(const Ranking& partial, const Context& ctx, Rng& rng) {
  PadResult out;
  out.ranking.source_context = partial.source_context.empty() ? ctx.id() : partial.source_context;

  std::set<ItemId> candidate_set(ctx.candidates.begin(), ctx.candidates.end());
  std::set<ItemId> used;
  for (ItemId item : partial.items) {
    if (candidate_set.count(item) == 0 || used.count(item) > 0) {
      ++out.n_invalid;
      continue;
    }
    used.insert(item);
    out.ranking.items.push_back(item);
  }

  std::vector<ItemId> missing;
  for (ItemId item : ctx.candidates)
    if (used.count(item) == 0) missing.push_back(item);
  rng.shuffle(missing);
  out.ranking.items.insert(out.ranking.items.end(), missing.begin(), missing.end());
  return out;
}

}  // namespace rankrl
