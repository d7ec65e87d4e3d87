#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/data.hpp"

namespace rankrl {

enum class EsciLabel { Exact, Substitute, Complement, Irrelevant };

EsciLabel parse_esci_label(const std::string& s);

// Engagement signal -> relevance gain. Watch ratio is used directly;
// ratings map through 2^r - 1. Ratings may be fractional (imputed values)
// but must stay within [1, 5].
double interest_gain(SignalKind kind, double value);

// True iff the item has topics and none of them appears in the history
// topics. Items without topic annotations are non-niche.
bool niche_label(const std::vector<std::string>& item_topics,
                 const std::set<std::string>& history_topics);

double niche_gain(double base_score, bool is_niche, double alpha_bonus);

// Convex blend alpha * sim + (1 - alpha) * trend of min-max-normalized inputs.
double trend_gain(double sim_norm, double trend_norm, double alpha_blend);

// (v - min) / (max - min); a constant list maps to all zeros.
std::vector<double> minmax_normalize(const std::vector<double>& values);

// Interactions with `item` inside the half-open window (t - W, t].
int trend_count(const InteractionLog& interactions, ItemId item, Timestamp query_time,
                Timestamp window_seconds);

double esci_gain(EsciLabel label);

// Everything build_relevance may need; only the pieces required by the
// active need variant have to be present.
struct NeedInputs {
  const std::map<ItemId, double>* signals = nullptr;  // per-candidate engagement
  SignalKind signal_kind = SignalKind::WatchRatio;
  const EmbeddingTable* embeddings = nullptr;
  const TopicMap* topics = nullptr;
  const InteractionLog* interactions = nullptr;
  const std::map<ItemId, EsciLabel>* esci = nullptr;
  std::size_t recent_h = 10;
  double retrieval_gamma = 0.9;
  bool signal_weighting = true;
};

RelevanceTable build_relevance(const Context& ctx, const NeedKind& need, const NeedInputs& in);

// Golden-file format: one `item<TAB>gain` line per candidate, sorted by
// item id, 17 significant digits.
std::string relevance_to_text(const RelevanceTable& rel);
void save_relevance(const std::filesystem::path& p, const RelevanceTable& rel);

}  // namespace rankrl
