#include "rankrl/critic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "rankrl/parallel.hpp"
#include "rankrl/rng.hpp"
#include "rankrl/stats.hpp"

namespace rankrl {

CriticParams::CriticParams(const CriticConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  if (cfg.emb_dim <= 0) throw std::invalid_argument("CriticParams: emb_dim must be positive");
  if (cfg.hidden <= 0) throw std::invalid_argument("CriticParams: hidden must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("CriticParams: dropout must be in [0,1)");

  const std::size_t d = cfg.emb_dim, h = cfg.hidden, z = interaction_dim();
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t o = at;
    at += n;
    return o;
  };
  o_enc_w1_ = take(h * d);
  o_enc_b1_ = take(h);
  o_enc_g1_ = take(h);
  o_enc_c1_ = take(h);
  o_enc_w2_ = take(d * h);
  o_enc_b2_ = take(d);
  o_trunk_w_ = take(h * z);
  o_trunk_b_ = take(h);
  o_trunk_g_ = take(h);
  o_trunk_c_ = take(h);
  o_mean_w_ = take(h);
  o_mean_b_ = take(1);
  o_var_w_ = take(h);
  o_var_b_ = take(1);
  o_default_ = take(d);
  theta_.assign(at, 0.0);

  Rng rng(mix64(init_seed, 0xc417cULL));
  auto he_init = [&](std::size_t off, std::size_t rows, std::size_t cols) {
    const double s = std::sqrt(2.0 / static_cast<double>(cols));
    for (std::size_t i = 0; i < rows * cols; ++i) theta_[off + i] = s * rng.normal();
  };
  auto lin_init = [&](std::size_t off, std::size_t rows, std::size_t cols) {
    const double s = std::sqrt(1.0 / static_cast<double>(cols));
    for (std::size_t i = 0; i < rows * cols; ++i) theta_[off + i] = s * rng.normal();
  };
  he_init(o_enc_w1_, h, d);
  lin_init(o_enc_w2_, d, h);
  he_init(o_trunk_w_, h, z);
  lin_init(o_mean_w_, 1, h);
  lin_init(o_var_w_, 1, h);
  std::fill(theta_.begin() + o_enc_g1_, theta_.begin() + o_enc_g1_ + h, 1.0);
  std::fill(theta_.begin() + o_trunk_g_, theta_.begin() + o_trunk_g_ + h, 1.0);
}

std::vector<double> critic_history_input(const EmbeddingTable& emb,
                                         std::span<const Interaction> history,
                                         std::size_t recent_h) {
  if (history.empty()) return {};
  const std::size_t h = std::min(recent_h, history.size());
  const std::size_t start = history.size() - h;
  std::vector<double> x(emb.dim(), 0.0);
  double wsum = 0.0;
  for (std::size_t t = start; t < history.size(); ++t) {
    const double w = history[t].signal;
    const auto e = emb.vec(history[t].item);
    for (int k = 0; k < emb.dim(); ++k) x[k] += w * e[k];
    wsum += std::fabs(w);
  }
  if (wsum > 0.0)
    for (double& v : x) v /= wsum;
  return x;
}

namespace {

struct ForwardCache {
  std::vector<double> x0;          // encoder input (d)
  bool used_default = false;
  std::vector<double> a1, r1, n1, y1, d1;  // encoder hidden (h)
  double mu1 = 0.0, sigma1 = 0.0;
  std::vector<double> u;           // user vector (d)
  std::vector<double> z;           // interaction features (3d+1)
  std::vector<double> a3, r3, n3, y3, d3;  // trunk hidden (h)
  double mu3 = 0.0, sigma3 = 0.0;
  std::vector<double> mask1, mask2;  // dropout, empty in inference mode
  double mean = 0.0;
  double logvar_raw = 0.0, logvar = 0.0, variance = 1.0;
};

void linear_forward(const double* w, const double* b, std::span<const double> x,
                    std::vector<double>& out, std::size_t rows) {
  const std::size_t cols = x.size();
  out.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = b[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

void layernorm_forward(std::span<const double> x, const double* g, const double* c, double eps,
                       std::vector<double>& n, std::vector<double>& y, double& mu, double& sigma) {
  const std::size_t hh = x.size();
  mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(hh);
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(hh);
  sigma = std::sqrt(var + eps);
  n.resize(hh);
  y.resize(hh);
  for (std::size_t i = 0; i < hh; ++i) {
    n[i] = (x[i] - mu) / sigma;
    y[i] = g[i] * n[i] + c[i];
  }
}

// dL/dx for y = g * (x - mu)/sigma + c given dL/dn (n the normalized vector)
void layernorm_backward_input(std::span<const double> dn, std::span<const double> n, double sigma,
                              std::vector<double>& dx) {
  const std::size_t hh = dn.size();
  double mean_dn = 0.0, mean_dn_n = 0.0;
  for (std::size_t i = 0; i < hh; ++i) {
    mean_dn += dn[i];
    mean_dn_n += dn[i] * n[i];
  }
  mean_dn /= static_cast<double>(hh);
  mean_dn_n /= static_cast<double>(hh);
  dx.resize(hh);
  for (std::size_t i = 0; i < hh; ++i)
    dx[i] = (dn[i] - mean_dn - n[i] * mean_dn_n) / sigma;
}

void forward_pass(const CriticParams& p, std::span<const double> hist_input,
                  std::span<const double> item_emb, bool train_mode, std::uint64_t mask_seed,
                  ForwardCache& fc) {
  const CriticConfig& cfg = p.config();
  const std::size_t d = cfg.emb_dim, h = cfg.hidden;
  const auto& th = p.theta();
  if (item_emb.size() != d) throw std::invalid_argument("critic: item embedding dim mismatch");

  fc.used_default = hist_input.empty();
  if (fc.used_default) {
    fc.x0.assign(th.begin() + p.default_hist(), th.begin() + p.default_hist() + d);
  } else {
    if (hist_input.size() != d) throw std::invalid_argument("critic: history input dim mismatch");
    fc.x0.assign(hist_input.begin(), hist_input.end());
  }

  linear_forward(th.data() + p.enc_w1(), th.data() + p.enc_b1(), fc.x0, fc.a1, h);
  fc.r1.resize(h);
  for (std::size_t i = 0; i < h; ++i) fc.r1[i] = fc.a1[i] > 0.0 ? fc.a1[i] : 0.0;
  layernorm_forward(fc.r1, th.data() + p.enc_g1(), th.data() + p.enc_c1(), cfg.ln_eps, fc.n1,
                    fc.y1, fc.mu1, fc.sigma1);

  fc.d1 = fc.y1;
  if (train_mode && cfg.dropout > 0.0) {
    Rng rng(mix64(mask_seed, 0xd201ULL));
    fc.mask1.resize(h);
    const double keep = 1.0 - cfg.dropout;
    for (std::size_t i = 0; i < h; ++i) {
      fc.mask1[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      fc.d1[i] *= fc.mask1[i];
    }
  }

  linear_forward(th.data() + p.enc_w2(), th.data() + p.enc_b2(), fc.d1, fc.u, d);

  fc.z.resize(3 * d + 1);
  double dot_uc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    fc.z[i] = fc.u[i];
    fc.z[d + i] = item_emb[i];
    fc.z[2 * d + i] = fc.u[i] * item_emb[i];
    dot_uc += fc.u[i] * item_emb[i];
  }
  fc.z[3 * d] = dot_uc;

  linear_forward(th.data() + p.trunk_w(), th.data() + p.trunk_b(), fc.z, fc.a3, h);
  fc.r3.resize(h);
  for (std::size_t i = 0; i < h; ++i) fc.r3[i] = fc.a3[i] > 0.0 ? fc.a3[i] : 0.0;
  layernorm_forward(fc.r3, th.data() + p.trunk_g(), th.data() + p.trunk_c(), cfg.ln_eps, fc.n3,
                    fc.y3, fc.mu3, fc.sigma3);

  fc.d3 = fc.y3;
  if (train_mode && cfg.dropout > 0.0) {
    Rng rng(mix64(mask_seed, 0xd202ULL));
    fc.mask2.resize(h);
    const double keep = 1.0 - cfg.dropout;
    for (std::size_t i = 0; i < h; ++i) {
      fc.mask2[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      fc.d3[i] *= fc.mask2[i];
    }
  }

  fc.mean = th[p.mean_b()];
  fc.logvar_raw = th[p.var_b()];
  for (std::size_t i = 0; i < h; ++i) {
    fc.mean += th[p.mean_w() + i] * fc.d3[i];
    fc.logvar_raw += th[p.var_w() + i] * fc.d3[i];
  }
  fc.logvar = std::clamp(fc.logvar_raw, cfg.logvar_min, cfg.logvar_max);
  fc.variance = std::exp(fc.logvar);
}

// Backward from (dmean, dlogvar) into dtheta; returns nothing else.
void backward_pass(const CriticParams& p, std::span<const double> item_emb,
                   const ForwardCache& fc, double dmean, double dlogvar,
                   std::span<double> grad) {
  const CriticConfig& cfg = p.config();
  const std::size_t d = cfg.emb_dim, h = cfg.hidden;
  const auto& th = p.theta();

  const double dlogvar_raw =
      (fc.logvar_raw > cfg.logvar_min && fc.logvar_raw < cfg.logvar_max) ? dlogvar : 0.0;

  // heads
  std::vector<double> dd3(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    grad[p.mean_w() + i] += dmean * fc.d3[i];
    grad[p.var_w() + i] += dlogvar_raw * fc.d3[i];
    dd3[i] = dmean * th[p.mean_w() + i] + dlogvar_raw * th[p.var_w() + i];
  }
  grad[p.mean_b()] += dmean;
  grad[p.var_b()] += dlogvar_raw;

  // trunk dropout -> layernorm -> relu -> linear
  std::vector<double> dy3 = std::move(dd3);
  if (!fc.mask2.empty())
    for (std::size_t i = 0; i < h; ++i) dy3[i] *= fc.mask2[i];
  std::vector<double> dn3(h);
  for (std::size_t i = 0; i < h; ++i) {
    grad[p.trunk_g() + i] += dy3[i] * fc.n3[i];
    grad[p.trunk_c() + i] += dy3[i];
    dn3[i] = dy3[i] * th[p.trunk_g() + i];
  }
  std::vector<double> dr3;
  layernorm_backward_input(dn3, fc.n3, fc.sigma3, dr3);
  std::vector<double> da3(h);
  for (std::size_t i = 0; i < h; ++i) da3[i] = fc.a3[i] > 0.0 ? dr3[i] : 0.0;

  const std::size_t zdim = fc.z.size();
  std::vector<double> dz(zdim, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double g = da3[r];
    if (g == 0.0) continue;
    double* wrow = grad.data() + p.trunk_w() + r * zdim;
    const double* trow = th.data() + p.trunk_w() + r * zdim;
    for (std::size_t c = 0; c < zdim; ++c) {
      wrow[c] += g * fc.z[c];
      dz[c] += g * trow[c];
    }
    grad[p.trunk_b() + r] += g;
  }

  // z = [u, c, u*c, u.c]; c is a fixed input
  std::vector<double> du(d);
  for (std::size_t i = 0; i < d; ++i)
    du[i] = dz[i] + dz[2 * d + i] * item_emb[i] + dz[3 * d] * item_emb[i];

  // encoder output linear
  std::vector<double> dd1(h, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double g = du[r];
    double* wrow = grad.data() + p.enc_w2() + r * h;
    const double* trow = th.data() + p.enc_w2() + r * h;
    for (std::size_t c = 0; c < h; ++c) {
      wrow[c] += g * fc.d1[c];
      dd1[c] += g * trow[c];
    }
    grad[p.enc_b2() + r] += g;
  }

  std::vector<double> dy1 = std::move(dd1);
  if (!fc.mask1.empty())
    for (std::size_t i = 0; i < h; ++i) dy1[i] *= fc.mask1[i];
  std::vector<double> dn1(h);
  for (std::size_t i = 0; i < h; ++i) {
    grad[p.enc_g1() + i] += dy1[i] * fc.n1[i];
    grad[p.enc_c1() + i] += dy1[i];
    dn1[i] = dy1[i] * th[p.enc_g1() + i];
  }
  std::vector<double> dr1;
  layernorm_backward_input(dn1, fc.n1, fc.sigma1, dr1);
  std::vector<double> da1(h);
  for (std::size_t i = 0; i < h; ++i) da1[i] = fc.a1[i] > 0.0 ? dr1[i] : 0.0;

  std::vector<double> dx0(d, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double g = da1[r];
    if (g == 0.0) continue;
    double* wrow = grad.data() + p.enc_w1() + r * d;
    const double* trow = th.data() + p.enc_w1() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      wrow[c] += g * fc.x0[c];
      dx0[c] += g * trow[c];
    }
    grad[p.enc_b1() + r] += g;
  }
  if (fc.used_default)
    for (std::size_t c = 0; c < d; ++c) grad[p.default_hist() + c] += dx0[c];
}

}  // namespace

CriticPrediction critic_forward(const CriticParams& params, std::span<const double> hist_input,
                                std::span<const double> item_emb) {
  ForwardCache fc;
  forward_pass(params, hist_input, item_emb, /*train_mode=*/false, 0, fc);
  return {fc.mean, fc.variance};
}

CriticPrediction critic_predict(const CriticParams& params, const EmbeddingTable& emb,
                                const Context& ctx, ItemId item, std::size_t recent_h) {
  const auto hist = critic_history_input(emb, ctx.history, recent_h);
  return critic_forward(params, hist, emb.vec(item));
}

BetaNllResult beta_nll_loss(const CriticPrediction& pred, double target, double beta) {
  if (!(pred.variance > 0.0)) throw std::invalid_argument("beta_nll_loss: variance must be > 0");
  if (!std::isfinite(target)) throw std::invalid_argument("beta_nll_loss: non-finite target");
  BetaNllResult r;
  r.weight = std::pow(pred.variance, beta);
  const double err = target - pred.mean;
  const double logvar = std::log(pred.variance);
  r.loss = r.weight * (0.5 * logvar + err * err / (2.0 * pred.variance));
  r.dmean = r.weight * (pred.mean - target) / pred.variance;
  r.dlogvar = r.weight * (0.5 - err * err / (2.0 * pred.variance));
  return r;
}

double beta_nll_loss_fixed_weight(double mean, double variance, double target, double weight) {
  const double err = target - mean;
  return weight * (0.5 * std::log(variance) + err * err / (2.0 * variance));
}

double critic_train_step(const CriticParams& params, const EmbeddingTable& emb,
                         const CriticSample& sample, double beta, std::uint64_t mask_seed,
                         std::span<double> grad) {
  if (grad.size() != params.param_count())
    throw std::invalid_argument("critic_train_step: grad buffer size mismatch");
  ForwardCache fc;
  forward_pass(params, sample.hist_input, emb.vec(sample.item), /*train_mode=*/true, mask_seed, fc);
  const BetaNllResult nll = beta_nll_loss({fc.mean, fc.variance}, sample.target, beta);
  backward_pass(params, emb.vec(sample.item), fc, nll.dmean, nll.dlogvar, grad);
  return nll.loss;
}

CriticDataset build_critic_dataset(const InteractionLog& log, const EmbeddingTable& emb,
                                   std::size_t recent_h, std::uint64_t seed) {
  std::map<UserId, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < log.records.size(); ++i) by_user[log.records[i].user].push_back(i);

  std::vector<CriticSample> samples;
  samples.reserve(log.records.size());
  for (const auto& [user, idx] : by_user) {
    for (std::size_t target_i : idx) {
      const auto& rec = log.records[target_i];
      // leave-one-out history: the user's other interactions, most recent first
      std::vector<Interaction> hist;
      hist.reserve(idx.size() - 1);
      for (std::size_t other : idx) {
        if (other == target_i) continue;
        const auto& o = log.records[other];
        hist.push_back({o.item, o.value, o.timestamp});
      }
      std::sort(hist.begin(), hist.end(),
                [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
      CriticSample s;
      s.hist_input = critic_history_input(emb, hist, recent_h);
      s.item = rec.item;
      s.target = rec.value;
      samples.push_back(std::move(s));
    }
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix64(seed, 0xdaa7aULL));
  rng.shuffle(order);

  CriticDataset ds;
  const std::size_t n = samples.size();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(0.8 * n));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(0.1 * n));
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? ds.train : (i < n_train + n_val ? ds.val : ds.test);
    dst.push_back(std::move(samples[order[i]]));
  }
  return ds;
}

namespace {

struct EvalStats {
  double mse = 0.0, mae = 0.0;
  std::vector<double> means, targets, variances, sq_errors;
};

EvalStats evaluate_critic(const CriticParams& params, const EmbeddingTable& emb,
                          const std::vector<CriticSample>& samples) {
  EvalStats st;
  const std::size_t n = samples.size();
  st.means.resize(n);
  st.targets.resize(n);
  st.variances.resize(n);
  st.sq_errors.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const CriticPrediction pred =
        critic_forward(params, samples[i].hist_input, emb.vec(samples[i].item));
    st.means[i] = pred.mean;
    st.variances[i] = pred.variance;
    st.targets[i] = samples[i].target;
    st.sq_errors[i] = (pred.mean - samples[i].target) * (pred.mean - samples[i].target);
  });
  for (std::size_t i = 0; i < n; ++i) {
    st.mse += st.sq_errors[i];
    st.mae += std::fabs(st.means[i] - st.targets[i]);
  }
  if (n > 0) {
    st.mse /= static_cast<double>(n);
    st.mae /= static_cast<double>(n);
  }
  return st;
}

}  // namespace

std::string calibration_report_csv(const CalibrationReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "mse,mae,pearson_mean,pearson_var,epoch_best\n%.17g,%.17g,%.17g,%.17g,%d\n",
                r.mse, r.mae, r.pearson_mean, r.pearson_var, r.epoch_best);
  return buf;
}

TrainedCritic train_critic(const CriticDataset& dataset, const EmbeddingTable& emb,
                           const CriticConfig& arch, const TrainCriticConfig& cfg) {
  if (dataset.train.empty() || dataset.val.empty())
    throw std::invalid_argument("train_critic: empty train/val split");

  CriticConfig arch_cfg = arch;
  if (arch_cfg.emb_dim == 0) arch_cfg.emb_dim = emb.dim();
  CriticParams params(arch_cfg, mix64(cfg.seed, 0x1417ULL));
  const std::size_t np = params.param_count();

  std::vector<double> velocity(np, 0.0);
  std::vector<double> grad(np, 0.0);

  CriticParams best = params;
  double best_mse = evaluate_critic(params, emb, dataset.val).mse;
  int best_epoch = 0;

  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix64(cfg.seed, 0xe90cULL, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    const std::size_t batch = std::max(1, cfg.batch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const std::size_t bsize = end - start;
      std::fill(grad.begin(), grad.end(), 0.0);

      std::vector<double> losses(bsize, 0.0);
      blocked_reduce(bsize, 16, grad, [&](std::vector<double>& buf, std::size_t bi) {
        const std::size_t si = order[start + bi];
        const std::uint64_t mask_seed =
            mix64(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(si));
        losses[bi] = critic_train_step(params, emb, dataset.train[si], cfg.beta, mask_seed, buf);
      });

      double batch_loss = 0.0;
      for (double l : losses) batch_loss += l;
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error(
            "train_critic: non-finite loss at epoch " + std::to_string(epoch) +
            " (lr=" + std::to_string(cfg.lr) + ", batch loss diverged)");
      }
      const double scale = 1.0 / static_cast<double>(bsize);
      auto& th = params.theta();
      for (std::size_t j = 0; j < np; ++j) {
        velocity[j] = cfg.momentum * velocity[j] + grad[j] * scale;
        th[j] -= cfg.lr * velocity[j];
      }
    }

    const double val_mse = evaluate_critic(params, emb, dataset.val).mse;
    if (val_mse < best_mse) {
      best_mse = val_mse;
      best = params;
      best_epoch = epoch;
    }
  }

  TrainedCritic out;
  out.params = std::move(best);
  const auto& report_set = dataset.test.empty() ? dataset.val : dataset.test;
  const EvalStats st = evaluate_critic(out.params, emb, report_set);
  out.report.mse = st.mse;
  out.report.mae = st.mae;
  out.report.epoch_best = best_epoch;
  if (report_set.size() >= 3) {
    out.report.pearson_mean = pearson(st.means, st.targets);
    out.report.pearson_var = pearson(st.variances, st.sq_errors);
    out.report.pearson_mean_pvalue = pearson_pvalue(out.report.pearson_mean, report_set.size());
    out.report.pearson_var_pvalue = pearson_pvalue(out.report.pearson_var, report_set.size());
  }
  return out;
}

ImputedRewards impute_rewards(const CriticParams& params, const EmbeddingTable& emb,
                              const Context& ctx, const Ranking& ranking,
                              const std::map<ItemId, double>& observed, std::size_t recent_h) {
  ImputedRewards out;
  const std::size_t n = ranking.items.size();
  out.rewards.resize(n);
  out.variances.resize(n);
  const auto hist = critic_history_input(emb, ctx.history, recent_h);
  for (std::size_t i = 0; i < n; ++i) {
    const ItemId item = ranking.items[i];
    auto it = observed.find(item);
    if (it != observed.end()) {
      out.rewards[i] = it->second;
      out.variances[i] = 0.0;
    } else {
      const CriticPrediction pred = critic_forward(params, hist, emb.vec(item));
      out.rewards[i] = pred.mean;
      out.variances[i] = pred.variance;
    }
  }
  return out;
}

namespace {
constexpr std::uint32_t kCriticMagic = 0x524b4352U;  // "RKCR"
constexpr std::uint32_t kCriticVersion = 1;
}  // namespace

void save_critic(const std::filesystem::path& p, const CriticParams& params) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  const CriticConfig& cfg = params.config();
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto wd = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  w32(kCriticMagic);
  w32(kCriticVersion);
  w32(static_cast<std::uint32_t>(cfg.emb_dim));
  w32(static_cast<std::uint32_t>(cfg.hidden));
  wd(cfg.dropout);
  wd(cfg.logvar_min);
  wd(cfg.logvar_max);
  wd(cfg.ln_eps);
  f.write(reinterpret_cast<const char*>(params.theta().data()),
          static_cast<std::streamsize>(params.theta().size() * sizeof(double)));
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

CriticParams load_critic(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + p.string());
  auto r32 = [&]() {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto rd = [&]() {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (r32() != kCriticMagic) throw std::runtime_error("not a critic checkpoint: " + p.string());
  const std::uint32_t version = r32();
  if (version != kCriticVersion)
    throw std::runtime_error("unsupported critic checkpoint version " + std::to_string(version));
  CriticConfig cfg;
  cfg.emb_dim = static_cast<int>(r32());
  cfg.hidden = static_cast<int>(r32());
  cfg.dropout = rd();
  cfg.logvar_min = rd();
  cfg.logvar_max = rd();
  cfg.ln_eps = rd();
  CriticParams params(cfg, 0);
  f.read(reinterpret_cast<char*>(params.theta().data()),
         static_cast<std::streamsize>(params.theta().size() * sizeof(double)));
  if (!f) throw std::runtime_error("truncated critic checkpoint: " + p.string());
  return params;
}

KnnImputer::KnnImputer(const InteractionLog& log, CfMode mode, int k_neighbors)
    : mode_(mode), k_(k_neighbors) {
  if (k_ < 1) throw std::invalid_argument("KnnImputer: k_neighbors must be >= 1");
  users_ = log.users();
  items_ = log.items();
  const std::size_t nu = users_.size(), ni = items_.size();
  values_.assign(nu * ni, 0.0);
  observed_.assign(nu * ni, 0);

  std::vector<int> counts(values_.size(), 0);
  for (const auto& r : log.records) {
    const std::size_t idx = user_index(r.user) * ni + item_index(r.item);
    values_[idx] += r.value;  // repeated observations average
    ++counts[idx];
  }
  double total = 0.0;
  std::size_t n_obs = 0;
  user_obs_.resize(nu);
  item_obs_.resize(ni);
  user_norm2_.assign(nu, 0.0);
  item_norm2_.assign(ni, 0.0);
  for (std::size_t u = 0; u < nu; ++u) {
    for (std::size_t i = 0; i < ni; ++i) {
      const std::size_t idx = u * ni + i;
      if (counts[idx] == 0) continue;
      values_[idx] /= counts[idx];
      observed_[idx] = 1;
      user_obs_[u].push_back(i);
      item_obs_[i].push_back(u);
      user_norm2_[u] += values_[idx] * values_[idx];
      item_norm2_[i] += values_[idx] * values_[idx];
      total += values_[idx];
      ++n_obs;
    }
  }
  global_mean_ = n_obs > 0 ? total / static_cast<double>(n_obs) : 0.0;
}

std::size_t KnnImputer::user_index(UserId u) const {
  const auto it = std::lower_bound(users_.begin(), users_.end(), u);
  if (it == users_.end() || *it != u) throw std::out_of_range("KnnImputer: unknown user");
  return static_cast<std::size_t>(it - users_.begin());
}

std::size_t KnnImputer::item_index(ItemId i) const {
  const auto it = std::lower_bound(items_.begin(), items_.end(), i);
  if (it == items_.end() || *it != i) throw std::out_of_range("KnnImputer: unknown item");
  return static_cast<std::size_t>(it - items_.begin());
}

double KnnImputer::impute(UserId user, ItemId item) const {
  const std::size_t ni = items_.size();
  const auto uit = std::lower_bound(users_.begin(), users_.end(), user);
  const auto iit = std::lower_bound(items_.begin(), items_.end(), item);
  if (uit == users_.end() || *uit != user || iit == items_.end() || *iit != item)
    return global_mean_;  // cold start
  const std::size_t ui = static_cast<std::size_t>(uit - users_.begin());
  const std::size_t ii = static_cast<std::size_t>(iit - items_.begin());

  struct Neighbor {
    double sim;
    std::size_t idx;
    double value;
  };
  std::vector<Neighbor> neigh;

  if (mode_ == CfMode::UserKNN) {
    if (user_norm2_[ui] <= 0.0) return global_mean_;
    // candidate neighbors: users with an observation of `item`
    for (std::size_t v : item_obs_[ii]) {
      if (v == ui || user_norm2_[v] <= 0.0) continue;
      double dotp = 0.0;
      for (std::size_t j : user_obs_[ui])
        if (observed_[v * ni + j]) dotp += values_[ui * ni + j] * values_[v * ni + j];
      const double sim = dotp / std::sqrt(user_norm2_[ui] * user_norm2_[v]);
      if (sim > 0.0) neigh.push_back({sim, v, values_[v * ni + ii]});
    }
  } else {
    if (item_norm2_[ii] <= 0.0) return global_mean_;
    // candidate neighbors: items the user has observed
    for (std::size_t j : user_obs_[ui]) {
      if (j == ii || item_norm2_[j] <= 0.0) continue;
      double dotp = 0.0;
      for (std::size_t v : item_obs_[ii])
        if (observed_[v * ni + j]) dotp += values_[v * ni + ii] * values_[v * ni + j];
      const double sim = dotp / std::sqrt(item_norm2_[ii] * item_norm2_[j]);
      if (sim > 0.0) neigh.push_back({sim, j, values_[ui * ni + j]});
    }
  }

  if (neigh.empty()) return global_mean_;
  std::sort(neigh.begin(), neigh.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.idx < b.idx;
  });
  const std::size_t take = std::min<std::size_t>(k_, neigh.size());
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < take; ++t) {
    num += neigh[t].sim * neigh[t].value;
    den += neigh[t].sim;
  }
  return den > 0.0 ? num / den : global_mean_;
}

double knn_cf_impute(const InteractionLog& log, const Context& ctx, ItemId item, CfMode mode,
                     int k_neighbors) {
  const KnnImputer model(log, mode, k_neighbors);
  return model.impute(ctx.user_id, item);
}

}  // namespace rankrl
