#include "rankrl/needs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace rankrl {

EsciLabel parse_esci_label(const std::string& s) {
  if (s == "E") return EsciLabel::Exact;
  if (s == "S") return EsciLabel::Substitute;
  if (s == "C") return EsciLabel::Complement;
  if (s == "I") return EsciLabel::Irrelevant;
  throw std::invalid_argument("unknown ESCI label '" + s + "'");
}

double interest_gain(SignalKind kind, double value) {
  if (kind == SignalKind::WatchRatio) {
    if (value < 0.0) throw std::invalid_argument("interest_gain: negative watch ratio");
    return value;
  }
  if (value < 1.0 || value > 5.0)
    throw std::invalid_argument("interest_gain: rating outside [1,5]");
  return std::exp2(value) - 1.0;
}

bool niche_label(const std::vector<std::string>& item_topics,
                 const std::set<std::string>& history_topics) {
  if (item_topics.empty()) return false;
  for (const auto& t : item_topics)
    if (history_topics.count(t)) return false;
  return true;
}

double niche_gain(double base_score, bool is_niche, double alpha_bonus) {
  if (!(alpha_bonus > 0.0)) throw std::invalid_argument("niche_gain: alpha_bonus must be > 0");
  return is_niche ? base_score * (1.0 + alpha_bonus) : base_score;
}

double trend_gain(double sim_norm, double trend_norm, double alpha_blend) {
  if (!(alpha_blend > 0.0 && alpha_blend < 1.0))
    throw std::invalid_argument("trend_gain: alpha_blend must be in (0,1)");
  return alpha_blend * sim_norm + (1.0 - alpha_blend) * trend_norm;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) return out;  // constant list -> all zeros
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) * inv;
  return out;
}

int trend_count(const InteractionLog& interactions, ItemId item, Timestamp query_time,
                Timestamp window_seconds) {
  int n = 0;
  for (const auto& r : interactions.records) {
    if (r.item != item) continue;
    if (r.timestamp > query_time - window_seconds && r.timestamp <= query_time) ++n;
  }
  return n;
}

double esci_gain(EsciLabel label) {
  switch (label) {
    case EsciLabel::Exact: return 1.0;
    case EsciLabel::Substitute: return 0.1;
    case EsciLabel::Complement: return 0.01;
    case EsciLabel::Irrelevant: return 0.0;
  }
  throw std::logic_error("esci_gain: unknown label");
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> candidate_similarities(const Context& ctx, const NeedInputs& in) {
  if (!in.embeddings) throw std::invalid_argument("build_relevance: embeddings required");
  const auto q = query_embedding(ctx.history, *in.embeddings, in.recent_h, in.retrieval_gamma,
                                 in.signal_weighting);
  std::vector<double> sims(ctx.candidates.size(), 0.0);
  for (std::size_t i = 0; i < ctx.candidates.size(); ++i)
    sims[i] = cosine(q, in.embeddings->vec(ctx.candidates[i]));
  return sims;
}

}  // namespace

RelevanceTable build_relevance(const Context& ctx, const NeedKind& need, const NeedInputs& in) {
  std::vector<std::pair<ItemId, double>> gains;
  gains.reserve(ctx.candidates.size());

  switch (need.variant) {
    case NeedVariant::MaxInterest: {
      if (!in.signals) throw std::invalid_argument("build_relevance: signals required for MaxInterest");
      for (ItemId item : ctx.candidates) {
        auto it = in.signals->find(item);
        if (it == in.signals->end()) {
          gains.emplace_back(item, 0.0);  // no evidence of interest
          continue;
        }
        double v = it->second;
        if (in.signal_kind == SignalKind::WatchRatio) {
          v = std::max(v, 0.0);  // noisy measurements can dip below zero
        } else {
          v = std::clamp(v, 1.0, 5.0);  // imputed ratings may be fractional
        }
        gains.emplace_back(item, interest_gain(in.signal_kind, v));
      }
      break;
    }
    case NeedVariant::NicheDiscovery: {
      if (!in.topics) throw std::invalid_argument("build_relevance: topics required for NicheDiscovery");
      const auto sims = candidate_similarities(ctx, in);
      std::set<std::string> history_topics;
      for (const auto& rec : ctx.history) {
        auto it = in.topics->find(rec.item);
        if (it == in.topics->end()) continue;
        history_topics.insert(it->second.begin(), it->second.end());
      }
      for (std::size_t i = 0; i < ctx.candidates.size(); ++i) {
        const ItemId item = ctx.candidates[i];
        auto it = in.topics->find(item);
        static const std::vector<std::string> kNoTopics;
        const auto& ts = it == in.topics->end() ? kNoTopics : it->second;
        // retrieval cosines can be negative; gains must stay nonnegative
        const double base = std::max(sims[i], 0.0);
        gains.emplace_back(item, niche_gain(base, niche_label(ts, history_topics), need.alpha_bonus));
      }
      break;
    }
    case NeedVariant::TrendPromotion: {
      if (!in.interactions)
        throw std::invalid_argument("build_relevance: interactions required for TrendPromotion");
      const auto sims = candidate_similarities(ctx, in);
      std::vector<double> counts(ctx.candidates.size(), 0.0);
      for (std::size_t i = 0; i < ctx.candidates.size(); ++i)
        counts[i] = trend_count(*in.interactions, ctx.candidates[i], ctx.query_time,
                                need.window_seconds);
      const auto sim_norm = minmax_normalize(sims);
      const auto trend_norm = minmax_normalize(counts);
      for (std::size_t i = 0; i < ctx.candidates.size(); ++i)
        gains.emplace_back(ctx.candidates[i],
                           trend_gain(sim_norm[i], trend_norm[i], need.alpha_blend));
      break;
    }
    case NeedVariant::ProductSearch: {
      if (!in.esci) throw std::invalid_argument("build_relevance: esci labels required for ProductSearch");
      for (ItemId item : ctx.candidates) {
        auto it = in.esci->find(item);
        gains.emplace_back(item, it == in.esci->end() ? 0.0 : esci_gain(it->second));
      }
      break;
    }
  }
  return RelevanceTable(std::move(gains));
}

std::string relevance_to_text(const RelevanceTable& rel) {
  std::string out;
  char buf[80];
  for (const auto& [item, gain] : rel.entries()) {
    std::snprintf(buf, sizeof(buf), "%lld\t%.17g\n", static_cast<long long>(item), gain);
    out += buf;
  }
  return out;
}

void save_relevance(const std::filesystem::path& p, const RelevanceTable& rel) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  f << relevance_to_text(rel);
}

}  // namespace rankrl
