#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/data.hpp"
#include "rankrl/needs.hpp"
#include "rankrl/rng.hpp"

namespace rankrl {

// Autoregressive ranking policy: a discrete strategy choice followed by
// softmax selection without replacement over the remaining pool, scored by
// the chosen strategy's linear scorer. Parameters live in one flat vector
// [score_weights row-major (S x D), strategy_logits (S)] so optimizers and
// finite-difference checks can treat them uniformly.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(int n_strategies, int feature_dim, double temperature);

  int strategies() const { return n_strategies_; }
  int dim() const { return feature_dim_; }
  double temperature() const { return temperature_; }
  void set_temperature(double t);

  double weight(int s, int d) const { return theta_[static_cast<std::size_t>(s) * feature_dim_ + d]; }
  double logit(int s) const { return theta_[weights_size() + s]; }
  std::span<const double> weight_row(int s) const {
    return {theta_.data() + static_cast<std::size_t>(s) * feature_dim_,
            static_cast<std::size_t>(feature_dim_)};
  }

  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }
  std::size_t param_count() const { return theta_.size(); }
  std::size_t weights_size() const {
    return static_cast<std::size_t>(n_strategies_) * feature_dim_;
  }

 private:
  int n_strategies_ = 0;
  int feature_dim_ = 0;
  double temperature_ = 1.0;
  std::vector<double> theta_;
};

// Per-context feature matrix, rows aligned with ctx.candidates.
struct ContextFeatures {
  std::vector<ItemId> items;
  std::size_t dim = 0;
  std::vector<double> flat;  // items.size() x dim

  std::span<const double> row(std::size_t i) const { return {flat.data() + i * dim, dim}; }
  std::size_t index_of(ItemId item) const;
};

struct FeatureOptions {
  int proj_dim = 8;
  std::uint64_t proj_seed = 0xfea7ULL;
  std::size_t recent_h = 10;
  double retrieval_gamma = 0.9;
  bool signal_weighting = true;
};

// Deterministic stand-in for the textual context an LLM ranker would see:
// [query-item cosine, min-max trend count, niche flag, fixed random
// projection of the item embedding, need one-hot].
class FeatureBuilder {
 public:
  FeatureBuilder(const EmbeddingTable& emb, const TopicMap& topics, const InteractionLog& log,
                 FeatureOptions opt = {});

  int dim() const { return 3 + opt_.proj_dim + kNumNeeds; }
  ContextFeatures build(const Context& ctx) const;
  std::vector<double> featurize(const Context& ctx, ItemId item) const;

 private:
  const EmbeddingTable& emb_;
  const TopicMap& topics_;
  FeatureOptions opt_;
  std::vector<double> projection_;  // proj_dim x emb.dim
  std::map<ItemId, std::vector<Timestamp>> item_times_;  // sorted
};

struct Rollout {
  int strategy = 0;
  Ranking ranking;
  std::vector<double> step_logprobs;  // K+1; [0] is the strategy step
};

Rollout sample_rollout(const PolicyParams& params, const Context& ctx,
                       const ContextFeatures& features, Rng& rng);

// Greedy decode: argmax strategy, then score-descending order (ties by
// ascending item id).
Ranking greedy_ranking(const PolicyParams& params, const Context& ctx,
                       const ContextFeatures& features);

// Recomputes the K+1 step log-probabilities of a realized rollout.
std::vector<double> rollout_logprobs(const PolicyParams& params, const Rollout& rollout,
                                     const ContextFeatures& features);

// Exact gradients of each step log-probability with respect to the flat
// parameter vector; grads[s] has param_count() entries.
std::vector<std::vector<double>> rollout_logprob_grads(const PolicyParams& params,
                                                       const Rollout& rollout,
                                                       const ContextFeatures& features);

// One backward pass used by the trainer: accumulates
//   sum_s step_weight[s] * d logprob_s / d theta  -  entropy_scale * dH_s / d theta
// into grad (same length as theta). Returns the summed per-step entropy.
double accumulate_rollout_grad(const PolicyParams& params, const Rollout& rollout,
                               const ContextFeatures& features,
                               std::span<const double> step_weights, double entropy_scale,
                               std::span<double> grad);

// Summed entropy of the step distributions along a realized rollout.
double rollout_entropy(const PolicyParams& params, const Rollout& rollout,
                       const ContextFeatures& features);

// Checkpoints: little-endian header (magic, version, S, D, temperature)
// followed by the raw flat parameter array; round-trips bit-exactly.
void save_policy(const std::filesystem::path& p, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& p);

}  // namespace rankrl
