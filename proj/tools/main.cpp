// rankrl command-line driver: synthetic data generation, need construction,
// critic training, RL post-training, evaluation, and ablation sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rankrl/config.hpp"
#include "rankrl/env.hpp"
#include "rankrl/needs.hpp"
#include "rankrl/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace rankrl;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "override the config output directory");
}

ExperimentConfig load_experiment(const CommonArgs& args, ConfigMap& cfg) {
  cfg = ConfigMap::parse_file(args.config_path);
  if (args.seed) cfg.set("seed", std::to_string(*args.seed));
  if (!args.out.empty()) cfg.set("out", args.out);
  return ExperimentConfig::from_config(cfg);
}

fs::path require_out(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::runtime_error("an output directory is required (out = ... or --out)");
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

int cmd_gen_synthetic(const CommonArgs& args) {
  ConfigMap cfg_map;
  const ExperimentConfig cfg = load_experiment(args, cfg_map);
  cfg_map.finish();
  const fs::path out = require_out(cfg);

  SyntheticConfig syn = cfg.env.syn;
  syn.seed = cfg.seed;
  const SyntheticData data = generate_synthetic(syn);
  save_interaction_log(out / "interactions.csv", data.log);
  save_embedding_table(out / "embeddings.tsv", data.embeddings);
  save_topic_map(out / "topics.tsv", data.topics);
  std::cout << "wrote " << data.log.records.size() << " interactions, "
            << data.embeddings.size() << " embeddings to " << out << "\n";
  return 0;
}

int cmd_make_needs(const CommonArgs& args) {
  ConfigMap cfg_map;
  const ExperimentConfig cfg = load_experiment(args, cfg_map);
  cfg_map.finish();
  const fs::path out = require_out(cfg);

  Environment env = Environment::build(cfg.env);
  const fs::path dir = out / "needs";
  fs::create_directories(dir);
  std::size_t n = 0;
  for (const auto* split : {&env.train, &env.val, &env.test}) {
    for (const auto& cd : *split) {
      save_relevance(dir / (cd.ctx.id() + ".tsv"), cd.eval_rel);
      ++n;
    }
  }
  std::cout << "wrote " << n << " relevance tables to " << dir << "\n";
  return 0;
}

int cmd_train_critic(const CommonArgs& args) {
  ConfigMap cfg_map;
  ExperimentConfig cfg = load_experiment(args, cfg_map);
  cfg_map.finish();
  const fs::path out = require_out(cfg);

  Environment env = Environment::build(cfg.env);
  cfg.critic_checkpoint.clear();  // always train here
  const TrainedCritic critic = obtain_critic(cfg, env);
  save_critic(out / "critic.ckpt", critic.params);
  std::ofstream f(out / "calibration.csv");
  f << calibration_report_csv(critic.report);
  std::cout << "critic: mse=" << critic.report.mse << " pearson_mean=" << critic.report.pearson_mean
            << " pearson_var=" << critic.report.pearson_var << " (best epoch "
            << critic.report.epoch_best << ")\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  ConfigMap cfg_map;
  const ExperimentConfig cfg = load_experiment(args, cfg_map);
  cfg_map.finish();
  const fs::path out = require_out(cfg);

  Environment env = Environment::build(cfg.env);
  TrainedCritic critic;
  const CriticParams* critic_ptr = nullptr;
  if (cfg.trainer.reward_source == RewardSource::Critic) {
    critic = obtain_critic(cfg, env);
    if (cfg.critic_checkpoint.empty()) save_critic(out / "critic.ckpt", critic.params);
    critic_ptr = &critic.params;
  }
  env.prepare_rewards(cfg.trainer.reward_source, critic_ptr, cfg.trainer.cf_k_neighbors);

  const TrainResult result = run_train(cfg, env, out);
  if (result.aborted) {
    std::cerr << "error: training aborted on non-finite loss after step " << result.steps_run
              << "; last good checkpoint saved\n";
    return 2;
  }
  std::cout << "trained " << result.steps_run << " steps; final val ndcg5="
            << result.final_val_ndcg5 << " ndcg10=" << result.final_val_ndcg10 << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  ConfigMap cfg_map;
  const ExperimentConfig cfg = load_experiment(args, cfg_map);
  cfg_map.finish();
  const fs::path out = require_out(cfg);

  Environment env = Environment::build(cfg.env);
  PolicyParams params;
  if (!cfg.eval_rankings.empty()) {
    // external lists: the policy is unused; keep a uniform placeholder
    params = PolicyParams(cfg.policy.strategies, static_cast<int>(env.test.empty()
                                                                      ? env.train.front().features.dim
                                                                      : env.test.front().features.dim),
                          cfg.policy.temperature);
  } else if (!cfg.eval_checkpoint.empty()) {
    params = load_policy(cfg.eval_checkpoint);
  } else {
    throw std::runtime_error("eval requires eval.checkpoint or eval.rankings");
  }
  const EvalSummary s = run_eval(cfg, env, params, out);
  std::cout << "eval over " << s.n_contexts << " contexts: ndcg5=" << s.ndcg5
            << " ndcg10=" << s.ndcg10 << " ndcg30=" << s.ndcg30 << " recall5=" << s.recall5
            << " mrr5=" << s.mrr5 << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  ConfigMap cfg_map;
  const ExperimentConfig cfg = load_experiment(args, cfg_map);
  cfg_map.finish();
  const fs::path out = require_out(cfg);

  const auto rows = run_ablation(cfg, out);
  for (const auto& r : rows)
    std::cout << r.name << ": test ndcg5=" << r.final_metrics.ndcg5
              << " ndcg10=" << r.final_metrics.ndcg10 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"need-conditioned ranking RL trainer"};
  app.require_subcommand(1);

  CommonArgs gen_args, needs_args, critic_args, train_args, eval_args, ablate_args;
  add_common(app.add_subcommand("gen-synthetic", "generate a synthetic environment"), gen_args);
  add_common(app.add_subcommand("make-needs", "write per-context relevance tables"), needs_args);
  add_common(app.add_subcommand("train-critic", "train the interaction critic"), critic_args);
  add_common(app.add_subcommand("train", "RL post-training of the ranking policy"), train_args);
  add_common(app.add_subcommand("eval", "evaluate a checkpoint or external rankings"), eval_args);
  add_common(app.add_subcommand("ablate", "run an ablation preset"), ablate_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-synthetic")) return cmd_gen_synthetic(gen_args);
    if (app.got_subcommand("make-needs")) return cmd_make_needs(needs_args);
    if (app.got_subcommand("train-critic")) return cmd_train_critic(critic_args);
    if (app.got_subcommand("train")) return cmd_train(train_args);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args);
    if (app.got_subcommand("ablate")) return cmd_ablate(ablate_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
