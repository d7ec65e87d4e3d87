#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/rng.hpp"

namespace rankrl {

struct InteractionRecord {
  UserId user = 0;
  ItemId item = 0;
  Timestamp timestamp = 0;
  SignalKind kind = SignalKind::WatchRatio;
  double value = 0.0;
};

struct InteractionLog {
  std::vector<InteractionRecord> records;

  std::vector<UserId> users() const;  // distinct, ascending
  std::vector<ItemId> items() const;  // distinct, ascending
};

// Unit-norm item embeddings with contiguous storage. Vectors are normalized
// at load/insert time.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<ItemId>& ids() const { return ids_; }  // ascending

  void insert(ItemId id, std::vector<double> v);  // normalizes; rejects zero vectors
  bool contains(ItemId id) const;
  std::span<const double> vec(ItemId id) const;

 private:
  int dim_ = 0;
  std::vector<ItemId> ids_;
  std::vector<double> flat_;
  std::map<ItemId, std::size_t> index_;
};

using TopicMap = std::map<ItemId, std::vector<std::string>>;

// ---- file formats ----
// InteractionLog: CSV `user_id,item_id,timestamp,signal_kind,signal_value`.
// EmbeddingTable: line 1 `dim=<D>`, then `item<TAB>v1<TAB>...<TAB>vD`.
// TopicMap: `item<TAB>topic1,topic2,...`.
void save_interaction_log(const std::filesystem::path& p, const InteractionLog& log);
InteractionLog load_interaction_log(const std::filesystem::path& p);
void save_embedding_table(const std::filesystem::path& p, const EmbeddingTable& t);
EmbeddingTable load_embedding_table(const std::filesystem::path& p);
void save_topic_map(const std::filesystem::path& p, const TopicMap& topics);
TopicMap load_topic_map(const std::filesystem::path& p);

// Keeps ceil(fraction * n_u) uniformly chosen interactions per user. The
// per-user choice is a pure function of (seed, user id).
InteractionLog subsample_per_user(const InteractionLog& log, double fraction, std::uint64_t seed);

struct UserSplit {
  std::vector<UserId> train, val, test;
};

// User-disjoint partition with sizes matching the ratios up to rounding.
UserSplit split_users(const InteractionLog& log, double train_ratio, double val_ratio,
                      double test_ratio, std::uint64_t seed);
InteractionLog filter_log(const InteractionLog& log, const std::vector<UserId>& users);

// Temporally discounted, optionally signal-weighted mean of the H most
// recent history embeddings, normalized to unit length (zero query stays
// zero). Shared between retrieval and the feature pipeline.
std::vector<double> query_embedding(std::span<const Interaction> history,
                                    const EmbeddingTable& emb, std::size_t recent_h,
                                    double discount, bool signal_weighting);

// Top-C catalog items by cosine to the query, excluding everything in
// `history`; ties break by ascending item id.
std::vector<ItemId> retrieve_candidates(std::span<const Interaction> history,
                                        const EmbeddingTable& emb, std::size_t recent_h,
                                        std::size_t n_candidates, double discount,
                                        bool signal_weighting);

struct SyntheticConfig {
  int n_users = 1000;
  int n_items = 200;
  int latent_dim = 8;
  double noise_base = 0.2;
  double noise_hetero = 0.6;
  double sparsity = 0.1;      // fraction of (user, item) pairs observed
  int n_topics = 8;
  double embedding_noise = 0.05;
  Timestamp time_span = 30 * 86400;
  std::uint64_t seed = 0;
};

// Ground truth behind a synthetic environment. True engagement is
// 1 + tanh(u . i) in (0, 2); the observation noise std is
// noise_base + noise_hetero * noise_feature(item).
struct SyntheticTruth {
  int latent_dim = 0;
  double noise_base = 0.0;
  double noise_hetero = 0.0;
  std::vector<UserId> user_ids;
  std::vector<ItemId> item_ids;
  std::vector<double> user_latents;  // row-major
  std::vector<double> item_latents;
  std::map<ItemId, double> noise_feature;  // in [0, 1]

  double true_engagement(UserId u, ItemId i) const;
  double noise_std(ItemId i) const;
};

struct SyntheticData {
  InteractionLog log;
  EmbeddingTable embeddings;
  TopicMap topics;
  SyntheticTruth truth;
};

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

}  // namespace rankrl
