#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rankrl/advantage.hpp"
#include "rankrl/config.hpp"
#include "rankrl/env.hpp"

namespace rankrl {

struct TrainerConfig {
  int steps = 500;
  int group_size = 8;    // G rollouts per context
  int batch_groups = 4;  // contexts per step
  double lr = 1e-2;
  double clip_ratio = 0.2;
  double kl_coeff = 0.01;
  double entropy_coeff = 0.005;
  RewardVariant reward_variant = RewardVariant::CausalSwap;
  AdvantageMode advantage_mode = AdvantageMode::ItemLevel;
  bool uncertainty = false;
  bool item_uncertainty = false;
  RewardSource reward_source = RewardSource::GroundTruth;
  std::size_t reward_cutoff = 0;  // 0 = full ranking length
  int eval_every = 25;
  int inner_epochs = 1;
  int ref_refresh = 0;  // steps between reference-policy refreshes; 0 = never
  int cf_k_neighbors = 20;
};

struct PolicyConfig {
  int strategies = 3;
  double temperature = 1.0;
};

// Full experiment description, parsed from a config file.
struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out_dir;
  EnvConfig env;
  PolicyConfig policy;
  TrainerConfig trainer;
  CriticConfig critic_arch;
  TrainCriticConfig critic_train;
  std::filesystem::path critic_checkpoint;  // load if set; else train on demand
  std::filesystem::path eval_checkpoint;    // for the eval command
  std::filesystem::path eval_rankings;      // optional externally supplied lists
  std::string eval_split = "test";
  std::string ablate_preset;

  static ExperimentConfig from_config(ConfigMap& cfg);
};

struct EvalSummary {
  double ndcg5 = 0.0, ndcg5_se = 0.0;
  double ndcg10 = 0.0, ndcg10_se = 0.0;
  double ndcg30 = 0.0, ndcg30_se = 0.0;
  double recall5 = 0.0, recall5_se = 0.0;
  double mrr5 = 0.0, mrr5_se = 0.0;
  double precision5 = 0.0, precision5_se = 0.0;
  std::size_t n_contexts = 0;
};

struct TrainResult {
  PolicyParams policy;
  double final_val_ndcg5 = 0.0;
  double final_val_ndcg10 = 0.0;
  std::uint64_t context_stream_hash = 0;
  int steps_run = 0;
  bool aborted = false;
};

// Greedy-decode evaluation against the ground-truth relevance tables.
EvalSummary evaluate_policy(const PolicyParams& params, const std::vector<ContextData>& contexts,
                            std::vector<MetricReport>* per_context = nullptr);

// RL post-training loop. Writes train_log.csv and policy checkpoints into
// out_dir when it is non-empty.
TrainResult run_train(const ExperimentConfig& cfg, Environment& env,
                      const std::filesystem::path& out_dir);

// Loads/uses `params` for greedy decoding over the configured split and
// writes eval.csv / eval_summary.csv when out_dir is non-empty.
EvalSummary run_eval(const ExperimentConfig& cfg, Environment& env, const PolicyParams& params,
                     const std::filesystem::path& out_dir);

struct AblationRow {
  std::string name;
  EvalSummary final_metrics;
  double final_val_ndcg5 = 0.0;
  std::uint64_t context_stream_hash = 0;
};

// Runs the preset's configurations with a shared seed and writes
// ablation.csv.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::filesystem::path& out_dir);

// Trains (or loads) the critic an experiment needs.
TrainedCritic obtain_critic(const ExperimentConfig& cfg, const Environment& env);

}  // namespace rankrl
