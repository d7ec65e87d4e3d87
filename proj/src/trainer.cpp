#include "rankrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rankrl/metrics.hpp"
#include "rankrl/parallel.hpp"
#include "rankrl/stats.hpp"

namespace rankrl {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RewardVariant parse_reward_variant(const std::string& s) {
  if (s == "causal_swap") return RewardVariant::CausalSwap;
  if (s == "noncausal_swap") return RewardVariant::NonCausalSwap;
  if (s == "independent") return RewardVariant::IndependentContribution;
  throw std::runtime_error("unknown reward variant '" + s + "'");
}

AdvantageMode parse_advantage_mode(const std::string& s) {
  if (s == "item") return AdvantageMode::ItemLevel;
  if (s == "sequence") return AdvantageMode::SequenceLevel;
  throw std::runtime_error("unknown advantage mode '" + s + "'");
}

NeedKind parse_need(ConfigMap& cfg) {
  const std::string kind = cfg.get_string("need.kind", "max_interest");
  NeedKind need;
  if (kind == "max_interest")
    need.variant = NeedVariant::MaxInterest;
  else if (kind == "niche_discovery")
    need.variant = NeedVariant::NicheDiscovery;
  else if (kind == "trend_promotion")
    need.variant = NeedVariant::TrendPromotion;
  else if (kind == "product_search")
    need.variant = NeedVariant::ProductSearch;
  else
    throw std::runtime_error("unknown need kind '" + kind + "'");
  need.alpha_bonus = cfg.get_double("need.alpha_bonus", 0.5);
  need.alpha_blend = cfg.get_double("need.alpha_blend", 0.7);
  need.window_seconds = cfg.get_int("need.window_seconds", 86400);
  return need;
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(ConfigMap& cfg) {
  ExperimentConfig e;
  e.seed = cfg.get_u64("seed", 42);
  e.out_dir = cfg.get_string("out", "");

  const std::string source = cfg.get_string("data.source", "synthetic");
  if (source == "synthetic") {
    e.env.synthetic = true;
  } else if (source == "files") {
    e.env.synthetic = false;
    e.env.interactions = cfg.require_string("data.interactions");
    e.env.embeddings_path = cfg.require_string("data.embeddings");
    e.env.topics_path = cfg.get_string("data.topics", "");
    e.env.eval_interactions = cfg.get_string("data.eval_interactions", "");
  } else {
    throw std::runtime_error("data.source must be 'synthetic' or 'files'");
  }
  e.env.subsample_fraction = cfg.get_double("data.subsample_fraction", 1.0);
  e.env.history_len = static_cast<std::size_t>(cfg.get_int("data.history_len", 10));
  e.env.candidates = static_cast<std::size_t>(cfg.get_int("data.candidates", 10));
  e.env.retrieval_gamma = cfg.get_double("data.retrieval_gamma", 0.9);
  e.env.signal_weighting = cfg.get_bool("data.retrieval_signal_weighting", true);
  e.env.proj_dim = static_cast<int>(cfg.get_int("policy.proj_dim", 8));
  e.env.need = parse_need(cfg);
  e.env.seed = e.seed;

  e.env.syn.n_users = static_cast<int>(cfg.get_int("synthetic.users", 1000));
  e.env.syn.n_items = static_cast<int>(cfg.get_int("synthetic.items", 200));
  e.env.syn.latent_dim = static_cast<int>(cfg.get_int("synthetic.latent_dim", 8));
  e.env.syn.noise_base = cfg.get_double("synthetic.noise_base", 0.2);
  e.env.syn.noise_hetero = cfg.get_double("synthetic.noise_hetero", 0.6);
  e.env.syn.sparsity = cfg.get_double("synthetic.sparsity", 0.1);
  e.env.syn.n_topics = static_cast<int>(cfg.get_int("synthetic.topics", 8));
  e.env.syn.embedding_noise = cfg.get_double("synthetic.embedding_noise", 0.05);

  e.policy.strategies = static_cast<int>(cfg.get_int("policy.strategies", 3));
  e.policy.temperature = cfg.get_double("policy.temperature", 1.0);

  e.trainer.steps = static_cast<int>(cfg.get_int("trainer.steps", 500));
  e.trainer.group_size = static_cast<int>(cfg.get_int("trainer.group_size", 8));
  e.trainer.batch_groups = static_cast<int>(cfg.get_int("trainer.batch_groups", 4));
  e.trainer.lr = cfg.get_double("trainer.lr", 1e-2);
  e.trainer.clip_ratio = cfg.get_double("trainer.clip_ratio", 0.2);
  e.trainer.kl_coeff = cfg.get_double("trainer.kl_coeff", 0.01);
  e.trainer.entropy_coeff = cfg.get_double("trainer.entropy_coeff", 0.005);
  e.trainer.reward_variant = parse_reward_variant(cfg.get_string("trainer.reward_variant", "causal_swap"));
  e.trainer.advantage_mode = parse_advantage_mode(cfg.get_string("trainer.advantage_mode", "item"));
  e.trainer.uncertainty = cfg.get_bool("trainer.uncertainty", false);
  e.trainer.item_uncertainty = cfg.get_bool("trainer.item_uncertainty", false);
  e.trainer.reward_source = parse_reward_source(cfg.get_string("trainer.reward_source", "ground_truth"));
  e.trainer.reward_cutoff = static_cast<std::size_t>(cfg.get_int("trainer.reward_cutoff", 0));
  e.trainer.eval_every = static_cast<int>(cfg.get_int("trainer.eval_every", 25));
  e.trainer.inner_epochs = static_cast<int>(cfg.get_int("trainer.inner_epochs", 1));
  e.trainer.ref_refresh = static_cast<int>(cfg.get_int("trainer.ref_refresh", 0));
  e.trainer.cf_k_neighbors = static_cast<int>(cfg.get_int("cf.k_neighbors", 20));

  e.critic_arch.hidden = static_cast<int>(cfg.get_int("critic.hidden", 256));
  e.critic_arch.dropout = cfg.get_double("critic.dropout", 0.05);
  e.critic_train.lr = cfg.get_double("critic.lr", 1e-3);
  e.critic_train.momentum = cfg.get_double("critic.momentum", 0.9);
  e.critic_train.epochs = static_cast<int>(cfg.get_int("critic.epochs", 30));
  e.critic_train.batch = static_cast<int>(cfg.get_int("critic.batch", 128));
  e.critic_train.beta = cfg.get_double("critic.beta", 1.0);
  e.critic_train.seed = e.seed;
  e.critic_checkpoint = cfg.get_string("critic.checkpoint", "");

  e.eval_checkpoint = cfg.get_string("eval.checkpoint", "");
  e.eval_rankings = cfg.get_string("eval.rankings", "");
  e.eval_split = cfg.get_string("eval.split", "test");
  e.ablate_preset = cfg.get_string("ablate.preset", "");

  if (e.trainer.group_size < 2) throw std::runtime_error("trainer.group_size must be >= 2");
  if (e.trainer.steps < 0) throw std::runtime_error("trainer.steps must be >= 0");
  if (e.trainer.batch_groups < 1) throw std::runtime_error("trainer.batch_groups must be >= 1");
  if (e.trainer.kl_coeff < 0.0 || e.trainer.entropy_coeff < 0.0)
    throw std::runtime_error("trainer coefficients must be >= 0");
  if (!(e.trainer.clip_ratio > 0.0)) throw std::runtime_error("trainer.clip_ratio must be > 0");
  return e;
}

EvalSummary evaluate_policy(const PolicyParams& params, const std::vector<ContextData>& contexts,
                            std::vector<MetricReport>* per_context) {
  std::vector<MetricReport> reports(contexts.size());
  parallel_for(contexts.size(), [&](std::size_t i) {
    const Ranking y = greedy_ranking(params, contexts[i].ctx, contexts[i].features);
    reports[i] = compute_metrics(y, contexts[i].eval_rel);
  });

  EvalSummary s;
  s.n_contexts = reports.size();
  if (!reports.empty()) {
    std::vector<double> v(reports.size());
    auto fill = [&](auto field, double& mean, double& se) {
      for (std::size_t i = 0; i < reports.size(); ++i) v[i] = reports[i].*field;
      mean = mean_of(v);
      se = standard_error(v);
    };
    fill(&MetricReport::ndcg5, s.ndcg5, s.ndcg5_se);
    fill(&MetricReport::ndcg10, s.ndcg10, s.ndcg10_se);
    fill(&MetricReport::ndcg30, s.ndcg30, s.ndcg30_se);
    fill(&MetricReport::recall5, s.recall5, s.recall5_se);
    fill(&MetricReport::mrr5, s.mrr5, s.mrr5_se);
    fill(&MetricReport::precision5, s.precision5, s.precision5_se);
  }
  if (per_context) *per_context = std::move(reports);
  return s;
}

namespace {

// Variance of the NDCG-weighted sequence reward: critic variances scaled by
// the squared per-position weight discount/IDCG. A flat sum over a complete
// ranking would be permutation-invariant and the inverse-variance weights
// would collapse to 1 for every rollout.
double rollout_sequence_variance(const ContextData& cd, const Ranking& y, std::size_t cutoff) {
  if (cd.item_variance.empty()) return 0.0;
  const DcgCache cache(y, cd.train_rel, cutoff);
  if (cache.idcg <= 0.0) return 0.0;
  std::vector<double> terms(y.items.size(), 0.0);
  for (std::size_t r = 1; r <= y.items.size(); ++r) {
    const auto it = cd.item_variance.find(y.items[r - 1]);
    if (it == cd.item_variance.end()) continue;
    const double w = cache.discounts[r] / cache.idcg;
    terms[r - 1] = w * w * it->second;
  }
  return aggregate_sequence_variance(terms);
}

struct GroupBundle {
  RolloutGroup group;
  AdvantageAssignment assignment;
  const ContextData* cd = nullptr;
};

}  // namespace

TrainResult run_train(const ExperimentConfig& cfg, Environment& env,
                      const std::filesystem::path& out_dir) {
  const TrainerConfig& tc = cfg.trainer;
  if (env.train.empty()) throw std::runtime_error("run_train: no training contexts");

  const int feature_dim = static_cast<int>(env.train.front().features.dim);
  PolicyParams params(cfg.policy.strategies, feature_dim, cfg.policy.temperature);
  PolicyParams ref = params;
  PolicyParams last_good = params;

  const std::size_t cutoff = tc.reward_cutoff == 0 ? env.cfg.candidates : tc.reward_cutoff;

  std::ofstream log_csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log_csv.open(out_dir / "train_log.csv");
    if (!log_csv) throw std::runtime_error("cannot open train_log.csv for write");
    log_csv << "step,loss,surrogate,kl,entropy,mean_seq_reward,mean_item_reward,grad_norm,"
               "val_ndcg5,val_ndcg10\n";
  }

  TrainResult result;
  result.context_stream_hash = kFnvOffset;

  GrpoOptions gopt;
  gopt.clip_ratio = tc.clip_ratio;
  gopt.kl_coeff = tc.kl_coeff;
  gopt.entropy_coeff = tc.entropy_coeff;

  AdvantageOptions aopt;
  aopt.mode = tc.advantage_mode;
  aopt.uncertainty = tc.uncertainty;
  aopt.item_uncertainty = tc.item_uncertainty;

  // context sampling: shuffled cyclic order, reshuffled each pass
  std::vector<std::size_t> order(env.train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng order_rng(mix64(cfg.seed, 0x0cdeULL));
  order_rng.shuffle(order);
  std::size_t cursor = 0;

  auto eval_val = [&](double& n5, double& n10) {
    const EvalSummary s = evaluate_policy(params, env.val);
    n5 = s.ndcg5;
    n10 = s.ndcg10;
  };

  double val5 = 0.0, val10 = 0.0;
  eval_val(val5, val10);
  if (log_csv)
    log_csv << "0,,,,,,,," << fmt17(val5) << ',' << fmt17(val10) << "\n";

  const std::size_t g_count = static_cast<std::size_t>(tc.batch_groups);
  const std::size_t g_size = static_cast<std::size_t>(tc.group_size);

  for (int step = 1; step <= tc.steps; ++step) {
    // pick batch contexts
    std::vector<const ContextData*> batch;
    for (std::size_t b = 0; b < g_count; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&env.train[order[cursor++]]);
      result.context_stream_hash = fnv1a(result.context_stream_hash, batch.back()->ctx.id());
    }

    // sample rollouts group by group; every (group, rollout) slot gets its
    // own derived rng so the schedule cannot affect results
    std::vector<GroupBundle> bundles(g_count);
    for (std::size_t b = 0; b < g_count; ++b) {
      GroupBundle& bundle = bundles[b];
      bundle.cd = batch[b];
      bundle.group.rollouts.resize(g_size);
      bundle.group.old_logprobs.resize(g_size);
      bundle.group.ref_logprobs.resize(g_size);
      bundle.group.item_rewards.resize(g_size);
      bundle.group.seq_rewards.resize(g_size);
      bundle.group.seq_variances.resize(g_size);
    }
    parallel_for(g_count * g_size, [&](std::size_t flat) {
      const std::size_t b = flat / g_size;
      const std::size_t i = flat % g_size;
      const ContextData& cd = *batch[b];
      Rng rng(mix64(cfg.seed, mix64(0x5a3fULL, static_cast<std::uint64_t>(step), flat)));
      Rollout r = sample_rollout(params, cd.ctx, cd.features, rng);

      auto& group = bundles[b].group;
      group.item_rewards[i] =
          compute_item_rewards(tc.reward_variant, r.ranking, cd.train_rel, cutoff).per_rank;
      group.seq_rewards[i] = sequence_reward(r.ranking, cd.train_rel, cutoff);
      group.seq_variances[i] = tc.uncertainty ? rollout_sequence_variance(cd, r.ranking, cutoff) : 0.0;
      group.old_logprobs[i] = r.step_logprobs;
      group.ref_logprobs[i] = rollout_logprobs(ref, r, cd.features);
      group.rollouts[i] = std::move(r);
    });

    double mean_seq = 0.0, mean_item = 0.0;
    std::size_t item_count = 0;
    std::vector<const RolloutGroup*> group_ptrs;
    std::vector<const ContextFeatures*> feat_ptrs;
    std::vector<const AdvantageAssignment*> assign_ptrs;
    for (auto& bundle : bundles) {
      bundle.assignment = assign_token_advantages(bundle.group, aopt);
      group_ptrs.push_back(&bundle.group);
      feat_ptrs.push_back(&bundle.cd->features);
      assign_ptrs.push_back(&bundle.assignment);
      for (double v : bundle.group.seq_rewards) mean_seq += v;
      for (const auto& row : bundle.group.item_rewards)
        for (double v : row) {
          mean_item += v;
          ++item_count;
        }
    }
    mean_seq /= static_cast<double>(g_count * g_size);
    mean_item /= static_cast<double>(item_count);

    GrpoLoss loss;
    for (int inner = 0; inner < std::max(1, tc.inner_epochs); ++inner) {
      loss = grpo_loss(params, group_ptrs, feat_ptrs, assign_ptrs, gopt);
      if (!std::isfinite(loss.loss)) {
        result.aborted = true;
        break;
      }
      auto& th = params.theta();
      for (std::size_t j = 0; j < th.size(); ++j) th[j] -= tc.lr * loss.grad[j];
    }
    if (result.aborted) {
      params = last_good;
      break;
    }
    last_good = params;
    result.steps_run = step;

    if (tc.ref_refresh > 0 && step % tc.ref_refresh == 0) ref = params;

    double grad_norm = 0.0;
    for (double g : loss.grad) grad_norm += g * g;
    grad_norm = std::sqrt(grad_norm);

    const bool do_eval = tc.eval_every > 0 && (step % tc.eval_every == 0 || step == tc.steps);
    std::string val5_s, val10_s;
    if (do_eval) {
      eval_val(val5, val10);
      val5_s = fmt17(val5);
      val10_s = fmt17(val10);
    }
    if (log_csv) {
      log_csv << step << ',' << fmt17(loss.loss) << ',' << fmt17(loss.surrogate) << ','
              << fmt17(loss.kl) << ',' << fmt17(loss.entropy) << ',' << fmt17(mean_seq) << ','
              << fmt17(mean_item) << ',' << fmt17(grad_norm) << ',' << val5_s << ',' << val10_s
              << "\n";
    }
  }

  if (tc.steps == 0 || result.steps_run < tc.steps) {
    // steps=0 runs evaluation only; aborted runs keep the last good values
    eval_val(val5, val10);
  } else if (tc.eval_every <= 0) {
    eval_val(val5, val10);
  }
  result.final_val_ndcg5 = val5;
  result.final_val_ndcg10 = val10;
  result.policy = params;

  if (!out_dir.empty()) {
    save_policy(out_dir / "policy.ckpt", params);
  }
  return result;
}

namespace {

std::map<std::string, std::vector<ItemId>> load_ranking_lists(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open rankings file: " + p.string());
  std::map<std::string, std::vector<ItemId>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(p.string() + ":" + std::to_string(lineno) +
                               ": expected context_id<TAB>item,item,...");
    const std::string id = line.substr(0, tab);
    std::vector<ItemId> items;
    std::stringstream ss(line.substr(tab + 1));
    std::string field;
    while (std::getline(ss, field, ',')) {
      if (field.empty()) continue;
      items.push_back(std::stoll(field));
    }
    out[id] = std::move(items);
  }
  return out;
}

}  // namespace

EvalSummary run_eval(const ExperimentConfig& cfg, Environment& env, const PolicyParams& params,
                     const std::filesystem::path& out_dir) {
  const std::vector<ContextData>* split = &env.test;
  if (cfg.eval_split == "val")
    split = &env.val;
  else if (cfg.eval_split == "train")
    split = &env.train;
  else if (cfg.eval_split != "test")
    throw std::runtime_error("eval.split must be train, val, or test");

  std::vector<MetricReport> reports;
  EvalSummary summary;

  if (!cfg.eval_rankings.empty()) {
    // externally supplied ranked lists: invalid entries dropped and counted,
    // then random padding completes the permutation
    const auto lists = load_ranking_lists(cfg.eval_rankings);
    reports.resize(split->size());
    parallel_for(split->size(), [&](std::size_t i) {
      const ContextData& cd = (*split)[i];
      Ranking partial;
      partial.source_context = cd.ctx.id();
      const auto it = lists.find(cd.ctx.id());
      if (it != lists.end()) partial.items = it->second;
      Rng rng(mix64(cfg.seed, 0xbadULL, static_cast<std::uint64_t>(i)));
      const PadResult padded = pad_invalid(partial, cd.ctx, rng);
      reports[i] = compute_metrics(padded.ranking, cd.eval_rel);
      reports[i].n_invalid_items = padded.n_invalid;
    });
    std::vector<double> v(reports.size());
    summary.n_contexts = reports.size();
    auto fill = [&](auto field, double& mean, double& se) {
      for (std::size_t i = 0; i < reports.size(); ++i) v[i] = reports[i].*field;
      mean = reports.empty() ? 0.0 : mean_of(v);
      se = reports.empty() ? 0.0 : standard_error(v);
    };
    if (!reports.empty()) {
      fill(&MetricReport::ndcg5, summary.ndcg5, summary.ndcg5_se);
      fill(&MetricReport::ndcg10, summary.ndcg10, summary.ndcg10_se);
      fill(&MetricReport::ndcg30, summary.ndcg30, summary.ndcg30_se);
      fill(&MetricReport::recall5, summary.recall5, summary.recall5_se);
      fill(&MetricReport::mrr5, summary.mrr5, summary.mrr5_se);
      fill(&MetricReport::precision5, summary.precision5, summary.precision5_se);
    }
  } else {
    summary = evaluate_policy(params, *split, &reports);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / "eval.csv");
    if (!f) throw std::runtime_error("cannot open eval.csv for write");
    f << metric_report_csv_header() << "\n";
    for (const auto& r : reports) f << metric_report_csv_row(r) << "\n";

    std::ofstream s(out_dir / "eval_summary.csv");
    if (!s) throw std::runtime_error("cannot open eval_summary.csv for write");
    s << "metric,mean,stderr\n";
    s << "ndcg5," << fmt17(summary.ndcg5) << ',' << fmt17(summary.ndcg5_se) << "\n";
    s << "ndcg10," << fmt17(summary.ndcg10) << ',' << fmt17(summary.ndcg10_se) << "\n";
    s << "ndcg30," << fmt17(summary.ndcg30) << ',' << fmt17(summary.ndcg30_se) << "\n";
    s << "recall5," << fmt17(summary.recall5) << ',' << fmt17(summary.recall5_se) << "\n";
    s << "mrr5," << fmt17(summary.mrr5) << ',' << fmt17(summary.mrr5_se) << "\n";
    s << "precision5," << fmt17(summary.precision5) << ',' << fmt17(summary.precision5_se) << "\n";
  }
  return summary;
}

TrainedCritic obtain_critic(const ExperimentConfig& cfg, const Environment& env) {
  TrainedCritic out;
  if (!cfg.critic_checkpoint.empty()) {
    out.params = load_critic(cfg.critic_checkpoint);
    return out;
  }
  CriticConfig arch = cfg.critic_arch;
  arch.emb_dim = env.embeddings.dim();
  const CriticDataset ds = build_critic_dataset(env.train_log, env.embeddings,
                                                env.cfg.history_len, cfg.seed);
  return train_critic(ds, env.embeddings, arch, cfg.critic_train);
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::filesystem::path& out_dir) {
  struct RowSpec {
    std::string name;
    RewardVariant variant;
    RewardSource source;
    bool uncertainty;
  };
  std::vector<RowSpec> rows;
  if (cfg.ablate_preset == "reward_variants") {
    rows = {
        {"independent", RewardVariant::IndependentContribution, RewardSource::GroundTruth, false},
        {"noncausal_swap", RewardVariant::NonCausalSwap, RewardSource::GroundTruth, false},
        {"causal_swap", RewardVariant::CausalSwap, RewardSource::GroundTruth, false},
    };
  } else if (cfg.ablate_preset == "uncertainty") {
    rows = {
        {"user_knn", RewardVariant::CausalSwap, RewardSource::UserKnn, false},
        {"item_knn", RewardVariant::CausalSwap, RewardSource::ItemKnn, false},
        {"critic_raw", RewardVariant::CausalSwap, RewardSource::Critic, false},
        {"critic_ua", RewardVariant::CausalSwap, RewardSource::Critic, true},
    };
  } else {
    throw std::runtime_error("ablate.preset must be 'reward_variants' or 'uncertainty'");
  }

  Environment env = Environment::build(cfg.env);

  bool need_critic = false;
  for (const auto& r : rows) need_critic |= r.source == RewardSource::Critic;
  TrainedCritic critic;
  if (need_critic) critic = obtain_critic(cfg, env);

  std::vector<AblationRow> out;
  for (const auto& row : rows) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.trainer.reward_variant = row.variant;
    run_cfg.trainer.reward_source = row.source;
    run_cfg.trainer.uncertainty = row.uncertainty;

    env.prepare_rewards(row.source, row.source == RewardSource::Critic ? &critic.params : nullptr,
                        cfg.trainer.cf_k_neighbors);

    const std::filesystem::path row_dir = out_dir.empty() ? out_dir : out_dir / row.name;
    TrainResult tr = run_train(run_cfg, env, row_dir);

    AblationRow ar;
    ar.name = row.name;
    ar.final_val_ndcg5 = tr.final_val_ndcg5;
    ar.context_stream_hash = tr.context_stream_hash;
    ar.final_metrics = evaluate_policy(tr.policy, env.test);
    out.push_back(std::move(ar));
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / "ablation.csv");
    if (!f) throw std::runtime_error("cannot open ablation.csv for write");
    f << "variant,ndcg5,ndcg10,ndcg30,recall5,mrr5,precision5,final_val_ndcg5,context_stream_hash\n";
    for (const auto& r : out) {
      f << r.name << ',' << fmt17(r.final_metrics.ndcg5) << ',' << fmt17(r.final_metrics.ndcg10)
        << ',' << fmt17(r.final_metrics.ndcg30) << ',' << fmt17(r.final_metrics.recall5) << ','
        << fmt17(r.final_metrics.mrr5) << ',' << fmt17(r.final_metrics.precision5) << ','
        << fmt17(r.final_val_ndcg5) << ',' << r.context_stream_hash << "\n";
    }
  }
  return out;
}

}  // namespace rankrl
