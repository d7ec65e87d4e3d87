#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/critic.hpp"
#include "rankrl/data.hpp"
#include "rankrl/needs.hpp"
#include "rankrl/policy.hpp"

namespace rankrl {

enum class RewardSource { GroundTruth, Critic, UserKnn, ItemKnn };

RewardSource parse_reward_source(const std::string& s);
std::string reward_source_name(RewardSource s);

struct EnvConfig {
  bool synthetic = true;
  SyntheticConfig syn;
  // file mode
  std::filesystem::path interactions;
  std::filesystem::path embeddings_path;
  std::filesystem::path topics_path;
  std::filesystem::path eval_interactions;  // dense labels; defaults to `interactions`
  double subsample_fraction = 1.0;

  std::size_t history_len = 10;  // H
  std::size_t candidates = 10;   // C, the ranking length
  double retrieval_gamma = 0.9;
  bool signal_weighting = true;
  NeedKind need;
  int proj_dim = 8;
  std::uint64_t seed = 0;
};

// One ranking instance with everything the trainer needs precomputed:
// features, the training relevance table (under the active reward source),
// per-item reward variances, and the evaluation relevance table.
struct ContextData {
  Context ctx;
  ContextFeatures features;
  RelevanceTable train_rel;
  RelevanceTable eval_rel;
  std::map<ItemId, double> observed;       // candidate signals visible at train time
  std::map<ItemId, double> item_variance;  // critic variance; 0 when not imputed
};

class Environment {
 public:
  static Environment build(const EnvConfig& cfg);

  // Fills train_rel / item_variance on every context. `critic` is required
  // for RewardSource::Critic.
  void prepare_rewards(RewardSource source, const CriticParams* critic, int cf_k_neighbors);

  EnvConfig cfg;
  InteractionLog full_log;    // reward/eval labels (synthetic: observed draws)
  InteractionLog train_log;   // interactions of train-split users (critic/CF food)
  EmbeddingTable embeddings;
  TopicMap topics;
  std::optional<SyntheticTruth> truth;
  SignalKind signal_kind = SignalKind::WatchRatio;

  std::vector<ContextData> train, val, test;
};

}  // namespace rankrl
