#include "rankrl/env.hpp"

#include <algorithm>
#include <stdexcept>

#include "rankrl/parallel.hpp"

namespace rankrl {

RewardSource parse_reward_source(const std::string& s) {
  if (s == "ground_truth") return RewardSource::GroundTruth;
  if (s == "critic") return RewardSource::Critic;
  if (s == "user_knn") return RewardSource::UserKnn;
  if (s == "item_knn") return RewardSource::ItemKnn;
  throw std::runtime_error("unknown reward source '" + s + "'");
}

std::string reward_source_name(RewardSource s) {
  switch (s) {
    case RewardSource::GroundTruth: return "ground_truth";
    case RewardSource::Critic: return "critic";
    case RewardSource::UserKnn: return "user_knn";
    case RewardSource::ItemKnn: return "item_knn";
  }
  return "?";
}

namespace {

struct UserHistory {
  std::vector<Interaction> all;  // sorted ascending by time
};

std::map<UserId, UserHistory> histories_of(const InteractionLog& log) {
  std::map<UserId, UserHistory> out;
  for (const auto& r : log.records) out[r.user].all.push_back({r.item, r.value, r.timestamp});
  for (auto& [u, h] : out)
    std::sort(h.all.begin(), h.all.end(),
              [](const Interaction& a, const Interaction& b) {
                if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                return a.item < b.item;
              });
  return out;
}

// per-(user, item) label lookup from a log; repeated observations average
std::map<UserId, std::map<ItemId, double>> labels_of(const InteractionLog& log) {
  std::map<UserId, std::map<ItemId, double>> sums;
  std::map<UserId, std::map<ItemId, int>> counts;
  for (const auto& r : log.records) {
    sums[r.user][r.item] += r.value;
    counts[r.user][r.item] += 1;
  }
  for (auto& [u, items] : sums)
    for (auto& [i, v] : items) v /= counts[u][i];
  return sums;
}

}  // namespace

Environment Environment::build(const EnvConfig& cfg) {
  Environment env;
  env.cfg = cfg;

  InteractionLog sparse_log;
  if (cfg.synthetic) {
    SyntheticConfig syn = cfg.syn;
    syn.seed = cfg.seed;
    SyntheticData data = generate_synthetic(syn);
    env.full_log = data.log;
    env.embeddings = std::move(data.embeddings);
    env.topics = std::move(data.topics);
    env.truth = std::move(data.truth);
    env.signal_kind = SignalKind::WatchRatio;
    sparse_log = env.full_log;
  } else {
    sparse_log = load_interaction_log(cfg.interactions);
    env.embeddings = load_embedding_table(cfg.embeddings_path);
    if (!cfg.topics_path.empty()) env.topics = load_topic_map(cfg.topics_path);
    env.full_log = cfg.eval_interactions.empty() ? sparse_log
                                                 : load_interaction_log(cfg.eval_interactions);
    if (!sparse_log.records.empty()) env.signal_kind = sparse_log.records.front().kind;
  }
  if (cfg.subsample_fraction < 1.0)
    sparse_log = subsample_per_user(sparse_log, cfg.subsample_fraction, mix64(cfg.seed, 0x5ab5ULL));

  const UserSplit split = split_users(sparse_log, 0.8, 0.1, 0.1, cfg.seed);
  env.train_log = filter_log(sparse_log, split.train);

  const auto hist = histories_of(sparse_log);
  const auto eval_labels = labels_of(env.full_log);

  FeatureOptions fopt;
  fopt.proj_dim = cfg.proj_dim;
  fopt.recent_h = cfg.history_len;
  fopt.retrieval_gamma = cfg.retrieval_gamma;
  fopt.signal_weighting = cfg.signal_weighting;
  const FeatureBuilder builder(env.embeddings, env.topics, sparse_log, fopt);

  auto build_split = [&](const std::vector<UserId>& users, std::vector<ContextData>& out) {
    std::vector<const UserHistory*> hs;
    std::vector<UserId> uid;
    for (UserId u : users) {
      auto it = hist.find(u);
      if (it == hist.end() || it->second.all.empty()) continue;
      hs.push_back(&it->second);
      uid.push_back(u);
    }
    out.resize(hs.size());
    parallel_for(hs.size(), [&](std::size_t i) {
      const auto& h = hs[i]->all;
      ContextData cd;
      cd.ctx.user_id = uid[i];
      cd.ctx.need = cfg.need;
      const std::size_t keep = std::min(cfg.history_len, h.size());
      cd.ctx.history.assign(h.end() - keep, h.end());
      cd.ctx.query_time = h.back().timestamp + 1;
      cd.ctx.candidates = retrieve_candidates(h, env.embeddings, cfg.history_len, cfg.candidates,
                                              cfg.retrieval_gamma, cfg.signal_weighting);
      cd.features = builder.build(cd.ctx);

      // evaluation relevance: hidden truth when available, dense labels otherwise
      NeedInputs in;
      in.embeddings = &env.embeddings;
      in.topics = &env.topics;
      in.interactions = &env.full_log;
      in.signal_kind = env.signal_kind;
      in.recent_h = cfg.history_len;
      in.retrieval_gamma = cfg.retrieval_gamma;
      in.signal_weighting = cfg.signal_weighting;
      std::map<ItemId, double> signals;
      if (cfg.need.variant == NeedVariant::MaxInterest) {
        if (env.truth) {
          for (ItemId item : cd.ctx.candidates)
            signals[item] = env.truth->true_engagement(uid[i], item);
        } else {
          auto it = eval_labels.find(uid[i]);
          if (it != eval_labels.end()) {
            for (ItemId item : cd.ctx.candidates) {
              auto jt = it->second.find(item);
              if (jt != it->second.end()) signals[item] = jt->second;
            }
          }
        }
        in.signals = &signals;
      }
      cd.eval_rel = build_relevance(cd.ctx, cfg.need, in);
      cd.train_rel = cd.eval_rel;  // until prepare_rewards overrides
      out[i] = std::move(cd);
    });
  };
  build_split(split.train, env.train);
  build_split(split.val, env.val);
  build_split(split.test, env.test);
  return env;
}

void Environment::prepare_rewards(RewardSource source, const CriticParams* critic,
                                  int cf_k_neighbors) {
  if (source == RewardSource::GroundTruth) {
    for (auto* split : {&train, &val, &test})
      for (auto& cd : *split) {
        cd.train_rel = cd.eval_rel;
        cd.item_variance.clear();
      }
    return;
  }
  if (cfg.need.variant != NeedVariant::MaxInterest)
    throw std::runtime_error("imputed reward sources require the max_interest need");
  if (source == RewardSource::Critic && critic == nullptr)
    throw std::runtime_error("critic reward source requires a trained critic");

  // observed training-split signals per user
  const auto observed_labels = labels_of(train_log);

  std::optional<KnnImputer> knn;
  if (source == RewardSource::UserKnn)
    knn.emplace(train_log, CfMode::UserKNN, cf_k_neighbors);
  else if (source == RewardSource::ItemKnn)
    knn.emplace(train_log, CfMode::ItemKNN, cf_k_neighbors);

  auto impute_split = [&](std::vector<ContextData>& split) {
    parallel_for(split.size(), [&](std::size_t i) {
      ContextData& cd = split[i];
      cd.observed.clear();
      auto it = observed_labels.find(cd.ctx.user_id);
      if (it != observed_labels.end()) {
        for (ItemId item : cd.ctx.candidates) {
          auto jt = it->second.find(item);
          if (jt != it->second.end()) cd.observed[item] = jt->second;
        }
      }

      std::map<ItemId, double> signals;
      cd.item_variance.clear();
      const auto hist_input = critic ? critic_history_input(embeddings, cd.ctx.history,
                                                            cfg.history_len)
                                     : std::vector<double>{};
      for (ItemId item : cd.ctx.candidates) {
        auto jt = cd.observed.find(item);
        if (jt != cd.observed.end()) {
          signals[item] = jt->second;
          cd.item_variance[item] = 0.0;
          continue;
        }
        if (source == RewardSource::Critic) {
          const CriticPrediction pred = critic_forward(*critic, hist_input, embeddings.vec(item));
          signals[item] = pred.mean;
          cd.item_variance[item] = pred.variance;
        } else {
          signals[item] = knn->impute(cd.ctx.user_id, item);
          cd.item_variance[item] = 0.0;
        }
      }

      NeedInputs in;
      in.signals = &signals;
      in.signal_kind = signal_kind;
      cd.train_rel = build_relevance(cd.ctx, cfg.need, in);
    });
  };
  impute_split(train);
  impute_split(val);
  impute_split(test);
}

}  // namespace rankrl
