#include "rankrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rankrl {

PolicyParams::PolicyParams(int n_strategies, int feature_dim, double temperature)
    : n_strategies_(n_strategies), feature_dim_(feature_dim), temperature_(temperature) {
  if (n_strategies < 1) throw std::invalid_argument("PolicyParams: need at least one strategy");
  if (feature_dim < 1) throw std::invalid_argument("PolicyParams: feature_dim must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("PolicyParams: temperature must be > 0");
  theta_.assign(weights_size() + n_strategies_, 0.0);
}

void PolicyParams::set_temperature(double t) {
  if (!(t > 0.0)) throw std::invalid_argument("PolicyParams: temperature must be > 0");
  temperature_ = t;
}

std::size_t ContextFeatures::index_of(ItemId item) const {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i] == item) return i;
  throw std::out_of_range("ContextFeatures: item not in candidate set");
}

FeatureBuilder::FeatureBuilder(const EmbeddingTable& emb, const TopicMap& topics,
                               const InteractionLog& log, FeatureOptions opt)
    : emb_(emb), topics_(topics), opt_(opt) {
  if (opt_.proj_dim < 0) throw std::invalid_argument("FeatureBuilder: proj_dim must be >= 0");
  // fixed seeded Gaussian projection, rows scaled by 1/sqrt(proj_dim)
  Rng rng(mix64(opt_.proj_seed, static_cast<std::uint64_t>(emb.dim())));
  projection_.resize(static_cast<std::size_t>(opt_.proj_dim) * emb.dim());
  const double scale = opt_.proj_dim > 0 ? 1.0 / std::sqrt(static_cast<double>(opt_.proj_dim)) : 0.0;
  for (double& v : projection_) v = scale * rng.normal();

  for (const auto& r : log.records) item_times_[r.item].push_back(r.timestamp);
  for (auto& [item, times] : item_times_) std::sort(times.begin(), times.end());
}

ContextFeatures FeatureBuilder::build(const Context& ctx) const {
  ContextFeatures f;
  f.items = ctx.candidates;
  f.dim = static_cast<std::size_t>(dim());
  f.flat.assign(f.items.size() * f.dim, 0.0);

  const auto q = query_embedding(ctx.history, emb_, opt_.recent_h, opt_.retrieval_gamma,
                                 opt_.signal_weighting);

  std::set<std::string> history_topics;
  for (const auto& rec : ctx.history) {
    auto it = topics_.find(rec.item);
    if (it != topics_.end()) history_topics.insert(it->second.begin(), it->second.end());
  }

  // trend counts within the need's window, via binary search on sorted times
  std::vector<double> counts(f.items.size(), 0.0);
  for (std::size_t i = 0; i < f.items.size(); ++i) {
    auto it = item_times_.find(f.items[i]);
    if (it == item_times_.end()) continue;
    const auto& times = it->second;
    const Timestamp lo = ctx.query_time - ctx.need.window_seconds;
    counts[i] = static_cast<double>(
        std::upper_bound(times.begin(), times.end(), ctx.query_time) -
        std::upper_bound(times.begin(), times.end(), lo));
  }
  const auto trend_norm = minmax_normalize(counts);

  for (std::size_t i = 0; i < f.items.size(); ++i) {
    const ItemId item = f.items[i];
    const auto e = emb_.vec(item);
    double* row = f.flat.data() + i * f.dim;

    double cos = 0.0;
    for (int d = 0; d < emb_.dim(); ++d) cos += q[d] * e[d];
    row[0] = cos;
    row[1] = trend_norm[i];

    auto it = topics_.find(item);
    static const std::vector<std::string> kNoTopics;
    const auto& ts = it == topics_.end() ? kNoTopics : it->second;
    row[2] = niche_label(ts, history_topics) ? 1.0 : 0.0;

    for (int pd = 0; pd < opt_.proj_dim; ++pd) {
      double v = 0.0;
      const double* prow = projection_.data() + static_cast<std::size_t>(pd) * emb_.dim();
      for (int d = 0; d < emb_.dim(); ++d) v += prow[d] * e[d];
      row[3 + pd] = v;
    }
    row[3 + opt_.proj_dim + static_cast<int>(ctx.need.variant)] = 1.0;
  }
  return f;
}

std::vector<double> FeatureBuilder::featurize(const Context& ctx, ItemId item) const {
  const ContextFeatures f = build(ctx);
  const auto row = f.row(f.index_of(item));
  return {row.begin(), row.end()};
}

namespace {

// log softmax over scores gathered from the pool; fills probs
double log_sum_exp(std::span<const double> z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

struct StepDist {
  std::vector<double> probs;    // over pool entries
  std::vector<double> logprobs;
};

StepDist item_step_dist(const PolicyParams& params, const ContextFeatures& f,
                        std::span<const std::size_t> pool, int strategy) {
  StepDist d;
  const double inv_t = 1.0 / params.temperature();
  std::vector<double> z(pool.size());
  const auto w = params.weight_row(strategy);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto row = f.row(pool[i]);
    double s = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) s += w[k] * row[k];
    z[i] = s * inv_t;
  }
  const double lse = log_sum_exp(z);
  d.logprobs.resize(pool.size());
  d.probs.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    d.logprobs[i] = z[i] - lse;
    d.probs[i] = std::exp(d.logprobs[i]);
  }
  return d;
}

StepDist strategy_dist(const PolicyParams& params) {
  StepDist d;
  const int s_count = params.strategies();
  std::vector<double> z(s_count);
  for (int s = 0; s < s_count; ++s) z[s] = params.logit(s);
  const double lse = log_sum_exp(z);
  d.logprobs.resize(s_count);
  d.probs.resize(s_count);
  for (int s = 0; s < s_count; ++s) {
    d.logprobs[s] = z[s] - lse;
    d.probs[s] = std::exp(d.logprobs[s]);
  }
  return d;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;  // guard against rounding
}

double entropy_of(std::span<const double> probs, std::span<const double> logprobs) {
  double h = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) h -= probs[i] * logprobs[i];
  return h;
}

}  // namespace

Rollout sample_rollout(const PolicyParams& params, const Context& ctx,
                       const ContextFeatures& features, Rng& rng) {
  if (ctx.candidates.empty()) throw std::invalid_argument("sample_rollout: no candidates");
  Rollout r;
  r.ranking.source_context = ctx.id();

  const StepDist sd = strategy_dist(params);
  r.strategy = static_cast<int>(sample_index(sd.probs, rng));
  r.step_logprobs.push_back(sd.logprobs[r.strategy]);

  std::vector<std::size_t> pool(ctx.candidates.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  while (!pool.empty()) {
    const StepDist d = item_step_dist(params, features, pool, r.strategy);
    const std::size_t pick = sample_index(d.probs, rng);
    r.ranking.items.push_back(ctx.candidates[pool[pick]]);
    r.step_logprobs.push_back(d.logprobs[pick]);
    pool.erase(pool.begin() + pick);
  }
  return r;
}

Ranking greedy_ranking(const PolicyParams& params, const Context& ctx,
                       const ContextFeatures& features) {
  if (ctx.candidates.empty()) throw std::invalid_argument("greedy_ranking: no candidates");
  int strategy = 0;
  for (int s = 1; s < params.strategies(); ++s)
    if (params.logit(s) > params.logit(strategy)) strategy = s;

  const auto w = params.weight_row(strategy);
  std::vector<std::pair<double, ItemId>> scored;
  scored.reserve(ctx.candidates.size());
  for (std::size_t i = 0; i < ctx.candidates.size(); ++i) {
    const auto row = features.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) s += w[k] * row[k];
    scored.emplace_back(s, ctx.candidates[i]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  Ranking y;
  y.source_context = ctx.id();
  for (const auto& [s, item] : scored) y.items.push_back(item);
  return y;
}

std::vector<double> rollout_logprobs(const PolicyParams& params, const Rollout& rollout,
                                     const ContextFeatures& features) {
  const std::size_t n = rollout.ranking.items.size();
  if (n != features.items.size())
    throw std::invalid_argument("rollout_logprobs: rollout/context mismatch");
  std::vector<double> out;
  out.reserve(n + 1);

  const StepDist sd = strategy_dist(params);
  out.push_back(sd.logprobs[rollout.strategy]);

  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    const StepDist d = item_step_dist(params, features, pool, rollout.strategy);
    const std::size_t fi = features.index_of(rollout.ranking.items[k]);
    const auto it = std::find(pool.begin(), pool.end(), fi);
    if (it == pool.end()) throw std::invalid_argument("rollout_logprobs: repeated item in ranking");
    out.push_back(d.logprobs[it - pool.begin()]);
    pool.erase(it);
  }
  return out;
}

std::vector<std::vector<double>> rollout_logprob_grads(const PolicyParams& params,
                                                       const Rollout& rollout,
                                                       const ContextFeatures& features) {
  const std::size_t n = rollout.ranking.items.size();
  const std::size_t np = params.param_count();
  std::vector<std::vector<double>> grads(n + 1, std::vector<double>(np, 0.0));

  // strategy step: d logpi_s / d logit_j = 1{j=s} - pi_j
  const StepDist sd = strategy_dist(params);
  for (int s = 0; s < params.strategies(); ++s)
    grads[0][params.weights_size() + s] = (s == rollout.strategy ? 1.0 : 0.0) - sd.probs[s];

  const double inv_t = 1.0 / params.temperature();
  const std::size_t row_off = static_cast<std::size_t>(rollout.strategy) * params.dim();

  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    const StepDist d = item_step_dist(params, features, pool, rollout.strategy);
    const std::size_t fi = features.index_of(rollout.ranking.items[k]);
    const auto it = std::find(pool.begin(), pool.end(), fi);
    if (it == pool.end())
      throw std::invalid_argument("rollout_logprob_grads: repeated item in ranking");

    // d logp(a) / d w_s = (phi(a) - E_pool[phi]) / T
    auto& g = grads[k + 1];
    const auto chosen = features.row(fi);
    for (std::size_t dd = 0; dd < chosen.size(); ++dd) g[row_off + dd] = chosen[dd] * inv_t;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto row = features.row(pool[i]);
      const double p = d.probs[i];
      for (std::size_t dd = 0; dd < row.size(); ++dd) g[row_off + dd] -= p * row[dd] * inv_t;
    }
    pool.erase(it);
  }
  return grads;
}

double accumulate_rollout_grad(const PolicyParams& params, const Rollout& rollout,
                               const ContextFeatures& features,
                               std::span<const double> step_weights, double entropy_scale,
                               std::span<double> grad) {
  const std::size_t n = rollout.ranking.items.size();
  if (step_weights.size() != n + 1)
    throw std::invalid_argument("accumulate_rollout_grad: step weight length mismatch");
  if (grad.size() != params.param_count())
    throw std::invalid_argument("accumulate_rollout_grad: grad buffer length mismatch");

  double entropy_sum = 0.0;

  // strategy step
  const StepDist sd = strategy_dist(params);
  const double h0 = entropy_of(sd.probs, sd.logprobs);
  entropy_sum += h0;
  for (int s = 0; s < params.strategies(); ++s) {
    const double dlp = (s == rollout.strategy ? 1.0 : 0.0) - sd.probs[s];
    // dH/dz_j = -p_j (logp_j + H)
    const double dh = -sd.probs[s] * (sd.logprobs[s] + h0);
    grad[params.weights_size() + s] += step_weights[0] * dlp - entropy_scale * dh;
  }

  const double inv_t = 1.0 / params.temperature();
  const std::size_t row_off = static_cast<std::size_t>(rollout.strategy) * params.dim();

  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    const StepDist d = item_step_dist(params, features, pool, rollout.strategy);
    const double h = entropy_of(d.probs, d.logprobs);
    entropy_sum += h;

    const std::size_t fi = features.index_of(rollout.ranking.items[k]);
    const auto it = std::find(pool.begin(), pool.end(), fi);
    if (it == pool.end())
      throw std::invalid_argument("accumulate_rollout_grad: repeated item in ranking");
    const double wk = step_weights[k + 1];

    // logprob part: wk * (phi(a) - E[phi]) / T
    // entropy part: dH/dz_i = -p_i (logp_i + H) / T, chained onto phi_i
    const auto chosen = features.row(fi);
    for (std::size_t dd = 0; dd < chosen.size(); ++dd)
      grad[row_off + dd] += wk * chosen[dd] * inv_t;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto row = features.row(pool[i]);
      const double p = d.probs[i];
      const double dh = -p * (d.logprobs[i] + h) * inv_t;
      for (std::size_t dd = 0; dd < row.size(); ++dd)
        grad[row_off + dd] += -wk * p * row[dd] * inv_t - entropy_scale * dh * row[dd];
    }
    pool.erase(it);
  }
  return entropy_sum;
}

double rollout_entropy(const PolicyParams& params, const Rollout& rollout,
                       const ContextFeatures& features) {
  const std::size_t n = rollout.ranking.items.size();
  const StepDist sd = strategy_dist(params);
  double h = entropy_of(sd.probs, sd.logprobs);

  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    const StepDist d = item_step_dist(params, features, pool, rollout.strategy);
    h += entropy_of(d.probs, d.logprobs);
    const std::size_t fi = features.index_of(rollout.ranking.items[k]);
    const auto it = std::find(pool.begin(), pool.end(), fi);
    if (it == pool.end()) throw std::invalid_argument("rollout_entropy: repeated item");
    pool.erase(it);
  }
  return h;
}

namespace {
constexpr std::uint32_t kPolicyMagic = 0x524b504cU;  // "RKPL"
constexpr std::uint32_t kPolicyVersion = 1;

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_raw(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_policy(const std::filesystem::path& p, const PolicyParams& params) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  write_raw(f, kPolicyMagic);
  write_raw(f, kPolicyVersion);
  write_raw(f, static_cast<std::uint32_t>(params.strategies()));
  write_raw(f, static_cast<std::uint32_t>(params.dim()));
  const double t = params.temperature();
  write_raw(f, t);
  f.write(reinterpret_cast<const char*>(params.theta().data()),
          static_cast<std::streamsize>(params.theta().size() * sizeof(double)));
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

PolicyParams load_policy(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + p.string());
  std::uint32_t magic = 0, version = 0, s = 0, d = 0;
  double t = 0.0;
  read_raw(f, magic);
  read_raw(f, version);
  if (magic != kPolicyMagic) throw std::runtime_error("not a policy checkpoint: " + p.string());
  if (version != kPolicyVersion)
    throw std::runtime_error("unsupported policy checkpoint version " + std::to_string(version));
  read_raw(f, s);
  read_raw(f, d);
  read_raw(f, t);
  PolicyParams params(static_cast<int>(s), static_cast<int>(d), t);
  f.read(reinterpret_cast<char*>(params.theta().data()),
         static_cast<std::streamsize>(params.theta().size() * sizeof(double)));
  if (!f || f.gcount() !=
                static_cast<std::streamsize>(params.theta().size() * sizeof(double)))
    throw std::runtime_error("truncated policy checkpoint: " + p.string());
  return params;
}

}  // namespace rankrl
