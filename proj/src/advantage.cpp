#include "rankrl/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rankrl/parallel.hpp"

namespace rankrl {

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

Moments pooled_moments(const std::vector<std::vector<double>>& m) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : m) {
    for (double v : row) sum += v;
    n += row.size();
  }
  if (n == 0) throw std::invalid_argument("advantages: empty reward matrix");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& row : m)
    for (double v : row) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

}  // namespace

std::vector<std::vector<double>> item_advantages(const std::vector<std::vector<double>>& rewards,
                                                 double eps) {
  if (eps < 0.0) throw std::invalid_argument("item_advantages: eps must be >= 0");
  const Moments mom = pooled_moments(rewards);
  const double denom = mom.stddev + eps;
  std::vector<std::vector<double>> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i].resize(rewards[i].size());
    for (std::size_t k = 0; k < rewards[i].size(); ++k)
      out[i][k] = denom > 0.0 ? (rewards[i][k] - mom.mean) / denom : 0.0;
  }
  return out;
}

std::vector<double> seq_advantages(const std::vector<double>& rewards, double eps) {
  const auto m = item_advantages({rewards}, eps);
  return m[0];
}

std::vector<double> uncertainty_weights(const std::vector<double>& variances, double eps) {
  if (variances.empty()) throw std::invalid_argument("uncertainty_weights: empty list");
  std::vector<double> c(variances.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (variances[i] < 0.0) throw std::invalid_argument("uncertainty_weights: negative variance");
    const double denom = variances[i] + eps;
    if (!(denom > 0.0))
      throw std::invalid_argument("uncertainty_weights: zero variance requires eps > 0");
    c[i] = 1.0 / denom;
    mean += c[i];
  }
  mean /= static_cast<double>(c.size());
  for (double& v : c) v = std::min(v / mean, 1.0);
  return c;
}

double aggregate_sequence_variance(std::span<const double> item_vars) {
  double s = 0.0;
  for (double v : item_vars) {
    if (v < 0.0) throw std::invalid_argument("aggregate_sequence_variance: negative variance");
    s += v;
  }
  return s;
}

AdvantageAssignment assign_token_advantages(const RolloutGroup& group,
                                            const AdvantageOptions& opt) {
  const std::size_t g = group.size();
  if (g == 0) throw std::invalid_argument("assign_token_advantages: empty group");
  if (group.seq_rewards.size() != g)
    throw std::invalid_argument("assign_token_advantages: seq reward count mismatch");

  AdvantageAssignment out;
  out.seq_adv = seq_advantages(group.seq_rewards, opt.adv_eps);

  if (opt.uncertainty) {
    if (group.seq_variances.size() != g)
      throw std::invalid_argument("assign_token_advantages: seq variance count mismatch");
    out.weights = uncertainty_weights(group.seq_variances, opt.weight_eps);
  } else {
    out.weights.assign(g, 1.0);
  }
  out.weighted_seq_adv.resize(g);
  for (std::size_t i = 0; i < g; ++i) out.weighted_seq_adv[i] = out.weights[i] * out.seq_adv[i];

  if (opt.mode == AdvantageMode::ItemLevel) {
    if (group.item_rewards.size() != g)
      throw std::invalid_argument("assign_token_advantages: item reward count mismatch");
    out.item_adv = item_advantages(group.item_rewards, opt.adv_eps);

    if (opt.item_uncertainty) {
      if (group.item_variances.size() != g)
        throw std::invalid_argument("assign_token_advantages: item variance count mismatch");
      // same normalize-and-clip scheme, pooled over all G x K entries
      std::vector<double> pooled;
      for (const auto& row : group.item_variances)
        pooled.insert(pooled.end(), row.begin(), row.end());
      const std::vector<double> w = uncertainty_weights(pooled, opt.weight_eps);
      std::size_t at = 0;
      for (auto& row : out.item_adv)
        for (double& v : row) v *= w[at++];
    }
  }

  if (group.rollouts.size() != g)
    throw std::invalid_argument("assign_token_advantages: rollout count mismatch");
  out.step_adv.resize(g);
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t k = group.rollouts[i].ranking.items.size();
    auto& steps = out.step_adv[i];
    steps.assign(k + 1, 0.0);
    if (opt.mode == AdvantageMode::SequenceLevel) {
      for (double& v : steps) v = out.weighted_seq_adv[i];
    } else {
      if (out.item_adv[i].size() != k)
        throw std::invalid_argument("assign_token_advantages: item advantage length mismatch");
      steps[0] = out.weighted_seq_adv[i];  // the strategy step is a non-item token
      for (std::size_t j = 0; j < k; ++j) steps[j + 1] = out.item_adv[i][j];
    }
  }
  return out;
}

GrpoLoss grpo_loss(const PolicyParams& params, const std::vector<const RolloutGroup*>& groups,
                   const std::vector<const ContextFeatures*>& features,
                   const std::vector<const AdvantageAssignment*>& assignments,
                   const GrpoOptions& opt) {
  if (groups.size() != features.size() || groups.size() != assignments.size())
    throw std::invalid_argument("grpo_loss: group/feature/assignment count mismatch");
  if (!(opt.clip_ratio > 0.0)) throw std::invalid_argument("grpo_loss: clip_ratio must be > 0");

  std::size_t total_steps = 0;
  std::size_t total_rollouts = 0;
  for (const auto* g : groups) {
    for (const auto& r : g->rollouts) total_steps += r.step_logprobs.size();
    total_rollouts += g->size();
  }
  if (total_steps == 0) throw std::invalid_argument("grpo_loss: no steps");
  const double inv_steps = 1.0 / static_cast<double>(total_steps);

  // flatten (group, rollout) so rollouts can be processed in parallel with
  // per-slot outputs and an ordered merge
  struct Slot {
    const RolloutGroup* group;
    const ContextFeatures* feats;
    const AdvantageAssignment* assign;
    std::size_t rollout;
  };
  std::vector<Slot> slots;
  slots.reserve(total_rollouts);
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (std::size_t i = 0; i < groups[gi]->size(); ++i)
      slots.push_back({groups[gi], features[gi], assignments[gi], i});

  const std::size_t np = params.param_count();
  std::vector<std::vector<double>> grads(slots.size());
  std::vector<double> surr_parts(slots.size(), 0.0);
  std::vector<double> kl_parts(slots.size(), 0.0);
  std::vector<double> ent_parts(slots.size(), 0.0);

  parallel_for(slots.size(), [&](std::size_t si) {
    const Slot& slot = slots[si];
    const RolloutGroup& group = *slot.group;
    const Rollout& rollout = group.rollouts[slot.rollout];
    const std::size_t n_steps = rollout.step_logprobs.size();

    const std::vector<double> cur = rollout_logprobs(params, rollout, *slot.feats);
    const auto& ref = group.ref_logprobs[slot.rollout];
    const auto& old = group.old_logprobs[slot.rollout];
    const auto& adv = slot.assign->step_adv[slot.rollout];
    if (cur.size() != n_steps || ref.size() != n_steps || old.size() != n_steps ||
        adv.size() != n_steps)
      throw std::invalid_argument("grpo_loss: step list length mismatch");

    std::vector<double> step_weights(n_steps, 0.0);  // d loss / d cur_logprob
    double surr = 0.0, kl = 0.0;
    for (std::size_t s = 0; s < n_steps; ++s) {
      if (!std::isfinite(cur[s]) || !std::isfinite(ref[s]) || !std::isfinite(old[s]))
        throw std::invalid_argument("grpo_loss: non-finite logprob");
      const double rho = std::exp(cur[s] - old[s]);
      const double a = adv[s];
      const double unclipped = rho * a;
      const double clipped = std::clamp(rho, 1.0 - opt.clip_ratio, 1.0 + opt.clip_ratio) * a;
      surr += -std::min(unclipped, clipped);
      if (unclipped <= clipped) step_weights[s] += -a * rho * inv_steps;
      // else: the clipped branch is active and flat in theta

      const double d = ref[s] - cur[s];
      kl += std::exp(d) - d - 1.0;
      step_weights[s] += opt.kl_coeff * (1.0 - std::exp(d)) * inv_steps;
    }
    surr_parts[si] = surr;
    kl_parts[si] = kl;

    grads[si].assign(np, 0.0);
    ent_parts[si] = accumulate_rollout_grad(params, rollout, *slot.feats, step_weights,
                                            opt.entropy_coeff * inv_steps, grads[si]);
  });

  GrpoLoss out;
  out.grad.assign(np, 0.0);
  for (std::size_t si = 0; si < slots.size(); ++si) {
    out.surrogate += surr_parts[si];
    out.kl += kl_parts[si];
    out.entropy += ent_parts[si];
    for (std::size_t j = 0; j < np; ++j) out.grad[j] += grads[si][j];
  }
  out.surrogate *= inv_steps;
  out.kl *= inv_steps;
  out.entropy *= inv_steps;
  out.loss = out.surrogate + opt.kl_coeff * out.kl - opt.entropy_coeff * out.entropy;
  return out;
}

GrpoLoss grpo_loss(const PolicyParams& params, const RolloutGroup& group,
                   const ContextFeatures& features, const AdvantageAssignment& assignment,
                   const GrpoOptions& opt) {
  return grpo_loss(params, {&group}, {&features}, {&assignment}, opt);
}

}  // namespace rankrl
