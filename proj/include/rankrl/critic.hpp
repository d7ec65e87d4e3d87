#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rankrl/core.hpp"
#include "rankrl/data.hpp"

namespace rankrl {

struct CriticConfig {
  int emb_dim = 0;     // item embedding dimension, also the encoder output
  int hidden = 256;
  double dropout = 0.05;
  double logvar_min = -10.0;
  double logvar_max = 6.0;
  double ln_eps = 1e-5;
};

struct CriticPrediction {
  double mean = 0.0;
  double variance = 1.0;
};

// History encoder MLP (ReLU, LayerNorm, dropout) producing a user vector u,
// an interaction trunk over [u, c, u*c, u.c], and mean / log-variance heads.
// All parameters live in one flat vector so checkpointing, SGD, and
// finite-difference checks share a single view.
class CriticParams {
 public:
  CriticParams() = default;
  CriticParams(const CriticConfig& cfg, std::uint64_t init_seed);

  const CriticConfig& config() const { return cfg_; }
  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }
  std::size_t param_count() const { return theta_.size(); }

  // flat layout offsets
  std::size_t enc_w1() const { return o_enc_w1_; }
  std::size_t enc_b1() const { return o_enc_b1_; }
  std::size_t enc_g1() const { return o_enc_g1_; }
  std::size_t enc_c1() const { return o_enc_c1_; }
  std::size_t enc_w2() const { return o_enc_w2_; }
  std::size_t enc_b2() const { return o_enc_b2_; }
  std::size_t trunk_w() const { return o_trunk_w_; }
  std::size_t trunk_b() const { return o_trunk_b_; }
  std::size_t trunk_g() const { return o_trunk_g_; }
  std::size_t trunk_c() const { return o_trunk_c_; }
  std::size_t mean_w() const { return o_mean_w_; }
  std::size_t mean_b() const { return o_mean_b_; }
  std::size_t var_w() const { return o_var_w_; }
  std::size_t var_b() const { return o_var_b_; }
  std::size_t default_hist() const { return o_default_; }
  int interaction_dim() const { return 3 * cfg_.emb_dim + 1; }

 private:
  CriticConfig cfg_;
  std::vector<double> theta_;
  std::size_t o_enc_w1_ = 0, o_enc_b1_ = 0, o_enc_g1_ = 0, o_enc_c1_ = 0;
  std::size_t o_enc_w2_ = 0, o_enc_b2_ = 0;
  std::size_t o_trunk_w_ = 0, o_trunk_b_ = 0, o_trunk_g_ = 0, o_trunk_c_ = 0;
  std::size_t o_mean_w_ = 0, o_mean_b_ = 0, o_var_w_ = 0, o_var_b_ = 0;
  std::size_t o_default_ = 0;
};

// Signal-weighted mean of the (up to recent_h most recent) history item
// embeddings; empty history yields an empty vector, which the forward pass
// replaces with the learned default.
std::vector<double> critic_history_input(const EmbeddingTable& emb,
                                         std::span<const Interaction> history,
                                         std::size_t recent_h);

// Deterministic inference-mode forward (dropout off).
CriticPrediction critic_forward(const CriticParams& params, std::span<const double> hist_input,
                                std::span<const double> item_emb);

CriticPrediction critic_predict(const CriticParams& params, const EmbeddingTable& emb,
                                const Context& ctx, ItemId item, std::size_t recent_h = 10);

struct BetaNllResult {
  double loss = 0.0;
  double dmean = 0.0;
  double dlogvar = 0.0;
  double weight = 1.0;  // sigma^(2 beta), held constant in the gradients
};

// beta-NLL: w * (log(var)/2 + (target-mean)^2 / (2 var)), w = var^beta
// detached. beta = 0 recovers the plain Gaussian NLL.
BetaNllResult beta_nll_loss(const CriticPrediction& pred, double target, double beta);

// Same loss with an externally fixed weight; this is the scalar function
// finite-difference checks differentiate, since the detached weight is not
// part of the gradient.
double beta_nll_loss_fixed_weight(double mean, double variance, double target, double weight);

struct CriticSample {
  std::vector<double> hist_input;  // empty -> learned default
  ItemId item = 0;
  double target = 0.0;
};

// Train-mode forward + backward for one sample; accumulates d loss / d theta
// into `grad` and returns the loss. Dropout masks derive from mask_seed.
double critic_train_step(const CriticParams& params, const EmbeddingTable& emb,
                         const CriticSample& sample, double beta, std::uint64_t mask_seed,
                         std::span<double> grad);

struct CriticDataset {
  std::vector<CriticSample> train;
  std::vector<CriticSample> val;
  std::vector<CriticSample> test;  // held out for the calibration report
};

// Leave-one-out samples: for each observed interaction, the history input
// aggregates the user's other most recent interactions. Split 8:1:1 over
// interactions, seeded.
CriticDataset build_critic_dataset(const InteractionLog& log, const EmbeddingTable& emb,
                                   std::size_t recent_h, std::uint64_t seed);

struct TrainCriticConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 30;
  int batch = 128;
  double beta = 1.0;
  std::uint64_t seed = 0;
};

struct CalibrationReport {
  double mse = 0.0;
  double mae = 0.0;
  double pearson_mean = 0.0;       // corr(predicted mean, target)
  double pearson_var = 0.0;        // corr(predicted variance, squared error)
  double pearson_mean_pvalue = 1.0;
  double pearson_var_pvalue = 1.0;
  int epoch_best = 0;
};

std::string calibration_report_csv(const CalibrationReport& r);

struct TrainedCritic {
  CriticParams params;
  CalibrationReport report;
};

// Minibatch SGD with momentum; keeps the best-validation-MSE checkpoint and
// reports calibration on the held-out test slice.
TrainedCritic train_critic(const CriticDataset& dataset, const EmbeddingTable& emb,
                           const CriticConfig& arch, const TrainCriticConfig& cfg);

struct ImputedRewards {
  std::vector<double> rewards;    // aligned with the ranking
  std::vector<double> variances;  // 0 for observed entries
};

// Observed items keep their signal with variance 0; the critic fills the
// rest.
ImputedRewards impute_rewards(const CriticParams& params, const EmbeddingTable& emb,
                              const Context& ctx, const Ranking& ranking,
                              const std::map<ItemId, double>& observed,
                              std::size_t recent_h = 10);

void save_critic(const std::filesystem::path& p, const CriticParams& params);
CriticParams load_critic(const std::filesystem::path& p);

// ---- collaborative-filtering baselines ----

enum class CfMode { UserKNN, ItemKNN };

class KnnImputer {
 public:
  KnnImputer(const InteractionLog& log, CfMode mode, int k_neighbors);
  // Cosine-weighted average of the k most similar neighbors' observed
  // signals; global mean when none exist.
  double impute(UserId user, ItemId item) const;
  double global_mean() const { return global_mean_; }

 private:
  CfMode mode_;
  int k_ = 0;
  std::vector<UserId> users_;
  std::vector<ItemId> items_;
  std::vector<double> values_;   // users x items, dense
  std::vector<char> observed_;
  std::vector<std::vector<std::size_t>> user_obs_;  // item indices per user
  std::vector<std::vector<std::size_t>> item_obs_;  // user indices per item
  std::vector<double> user_norm2_;
  std::vector<double> item_norm2_;
  double global_mean_ = 0.0;

  std::size_t user_index(UserId u) const;
  std::size_t item_index(ItemId i) const;
};

double knn_cf_impute(const InteractionLog& log, const Context& ctx, ItemId item, CfMode mode,
                     int k_neighbors);

}  // namespace rankrl
