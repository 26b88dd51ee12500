#include "ikea/grpo.hpp"

#include <algorithm>
#include <cmath>

namespace ikea {

namespace {

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// Per-token quantities at the current parameters.
struct TokenTerms {
  double surrogate = 0.0;  // min(r A, clip(r) A)
  double d_surrogate = 0.0;  // d/d new_lp of the above
  double kl = 0.0;
  double d_kl = 0.0;
};

TokenTerms token_terms(double new_lp, double old_lp, double ref_lp, double adv, double eps) {
  TokenTerms t;
  const double ratio = std::exp(new_lp - old_lp);
  const double unclipped = ratio * adv;
  const double clipped = clip(ratio, 1.0 - eps, 1.0 + eps) * adv;
  if (unclipped <= clipped) {
    t.surrogate = unclipped;
    t.d_surrogate = unclipped;
  } else {
    t.surrogate = clipped;
  }
  const double diff = ref_lp - new_lp;
  t.kl = std::exp(diff) - diff - 1.0;
  t.d_kl = 1.0 - std::exp(diff);
  return t;
}

struct TrajectoryEval {
  double loss = 0.0;
  double kl = 0.0;
  std::vector<std::vector<double>> logp;  // per token, full vocabulary
  std::vector<double> scale;              // d loss_i / d new_lp_t
};

TrajectoryEval eval_trajectory(const ToyPolicy& policy, const PreparedTrajectory& tr,
                               const OptimConfig& cfg, bool keep_logp) {
  TrajectoryEval ev;
  const std::size_t m = tr.token_ids.size();
  const double inv_m = 1.0 / static_cast<double>(m);
  double surrogate = 0.0;
  double kl = 0.0;
  if (keep_logp) {
    ev.logp.resize(m);
    ev.scale.resize(m);
  }
  for (std::size_t t = 0; t < m; ++t) {
    auto logp = policy.log_probs(tr.features[t]);
    const auto terms = token_terms(logp[tr.token_ids[t]], tr.old_lp[t], tr.ref_lp[t], tr.advantage,
                                   cfg.clip_eps);
    surrogate += terms.surrogate;
    kl += terms.kl;
    if (keep_logp) {
      ev.scale[t] = inv_m * (-terms.d_surrogate + cfg.kl_coeff * terms.d_kl);
      ev.logp[t] = std::move(logp);
    }
  }
  ev.kl = kl * inv_m;
  ev.loss = -surrogate * inv_m + cfg.kl_coeff * ev.kl;
  return ev;
}

}  // namespace

GroupAdvantages group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw GroupTooSmall();
  GroupAdvantages out;
  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  out.mu = sum / n;
  out.advantages.assign(rewards.size(), 0.0);
  // Rounding in the mean would otherwise give equal rewards a tiny sigma
  // and advantages of +-1.
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) {
    out.mu = *lo;
    return out;
  }
  double sq = 0.0;
  for (double r : rewards) sq += (r - out.mu) * (r - out.mu);
  out.sigma = std::sqrt(sq / n);
  if (out.sigma > 0.0) {
    for (std::size_t i = 0; i < rewards.size(); ++i) out.advantages[i] = (rewards[i] - out.mu) / out.sigma;
  }
  return out;
}

void fill_group_statistics(GroupBatch& group) {
  std::vector<double> rewards;
  for (const auto& t : group.trajectories) {
    if (!t.reward) throw Error("trajectory in group " + group.group_id + " has no reward");
    rewards.push_back(t.reward->total);
  }
  auto adv = group_advantages(rewards);
  group.mu_r = adv.mu;
  group.sigma_r = adv.sigma;
  group.advantages = std::move(adv.advantages);
}

double clipped_surrogate(std::span<const double> new_lp, std::span<const double> old_lp,
                         std::span<const std::uint8_t> mask, double advantage, double eps) {
  if (new_lp.size() != old_lp.size() || new_lp.size() != mask.size()) {
    throw Error("clipped_surrogate: length mismatch");
  }
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    ++m;
    const double ratio = std::exp(new_lp[t] - old_lp[t]);
    sum += std::min(ratio * advantage, clip(ratio, 1.0 - eps, 1.0 + eps) * advantage);
  }
  if (m == 0) throw EmptyMask();
  return -sum / static_cast<double>(m);
}

double kl_term(std::span<const double> new_lp, std::span<const double> ref_lp,
               std::span<const std::uint8_t> mask) {
  if (new_lp.size() != ref_lp.size() || new_lp.size() != mask.size()) {
    throw Error("kl_term: length mismatch");
  }
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    ++m;
    const double diff = ref_lp[t] - new_lp[t];
    sum += std::exp(diff) - diff - 1.0;
  }
  if (m == 0) throw EmptyMask();
  return sum / static_cast<double>(m);
}

void OptimConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error("clip_eps must be in (0, 1)");
  if (kl_coeff < 0.0) throw Error("kl_coeff must be >= 0");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (batch_tasks < 1) throw Error("batch_tasks must be >= 1");
  if (updates_per_batch < 1) throw Error("updates_per_batch must be >= 1");
}

std::vector<PreparedTrajectory> prepare_batch(const ToyPolicy& policy,
                                              const std::vector<GroupBatch>& groups,
                                              const ToyPolicy* reference) {
  std::vector<PreparedTrajectory> out;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const auto& tr = g.trajectories[i];
      if (!tr.old_logprobs || tr.action_tokens() == 0) continue;
      PreparedTrajectory p;
      p.advantage = i < g.advantages.size() ? g.advantages[i] : 0.0;
      std::string state = tr.prompt;
      for (std::size_t t = 0; t < tr.tokens.size(); ++t) {
        if (tr.loss_mask[t]) {
          p.features.push_back(policy.features(state));
          p.token_ids.push_back(policy.token_id(tr.tokens[t]));
          p.old_lp.push_back((*tr.old_logprobs)[t]);
          if (reference != nullptr) {
            p.ref_lp.push_back(reference->log_probs(p.features.back())[p.token_ids.back()]);
          } else {
            p.ref_lp.push_back(p.old_lp.back());
          }
        }
        state += tr.tokens[t];
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

double grpo_loss(const ToyPolicy& policy, const std::vector<PreparedTrajectory>& batch,
                 const OptimConfig& cfg) {
  if (batch.empty()) throw MissingLogprobs();
  double total = 0.0;
  for (const auto& tr : batch) total += eval_trajectory(policy, tr, cfg, false).loss;
  return total / static_cast<double>(batch.size());
}

LossAndGrad grpo_loss_and_grad_serial(const ToyPolicy& policy,
                                      const std::vector<PreparedTrajectory>& batch,
                                      const OptimConfig& cfg) {
  if (batch.empty()) throw MissingLogprobs();
  LossAndGrad out;
  out.grad.assign(policy.num_parameters(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& tr : batch) {
    const auto ev = eval_trajectory(policy, tr, cfg, true);
    out.loss += ev.loss;
    out.kl += ev.kl;
    for (std::size_t t = 0; t < tr.token_ids.size(); ++t) {
      policy.add_logprob_grad(tr.features[t], ev.logp[t], tr.token_ids[t], ev.scale[t] * inv_n, out.grad);
    }
  }
  out.loss *= inv_n;
  out.kl *= inv_n;
  return out;
}

LossAndGrad grpo_loss_and_grad(const ToyPolicy& policy, const std::vector<PreparedTrajectory>& batch,
                               const OptimConfig& cfg) {
  if (batch.empty()) throw MissingLogprobs();
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<TrajectoryEval> evals(batch.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    evals[k] = eval_trajectory(policy, batch[k], cfg, true);
  }

  LossAndGrad out;
  out.grad.assign(policy.num_parameters(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& ev : evals) {
    out.loss += ev.loss;
    out.kl += ev.kl;
  }
  out.loss *= inv_n;
  out.kl *= inv_n;

  // Each vocabulary row is owned by one thread and accumulated in the same
  // (trajectory, token, feature) order as the serial reference.
  const std::size_t dim = policy.dim();
  const auto vocab = static_cast<std::ptrdiff_t>(policy.vocab_size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t vi = 0; vi < vocab; ++vi) {
    const auto v = static_cast<std::size_t>(vi);
    double* row = out.grad.data() + v * dim;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& tr = batch[k];
      const auto& ev = evals[k];
      for (std::size_t t = 0; t < tr.token_ids.size(); ++t) {
        const double coeff =
            ev.scale[t] * inv_n * ((v == tr.token_ids[t] ? 1.0 : 0.0) - std::exp(ev.logp[t][v]));
        const auto& f = tr.features[t];
        for (std::size_t j = 0; j < f.size(); ++j) row[f.index[j]] += coeff * f.value[j];
      }
    }
  }
  return out;
}

StepMetrics grpo_step(ToyPolicy& policy, std::vector<GroupBatch>& groups, const OptimConfig& cfg,
                      const ToyPolicy* reference) {
  StepMetrics m;
  double reward_sum = 0.0;
  double rt_sum = 0.0;
  double len_sum = 0.0;
  for (auto& g : groups) {
    if (g.advantages.size() != g.trajectories.size()) fill_group_statistics(g);
    for (const auto& t : g.trajectories) {
      ++m.trajectories;
      reward_sum += t.reward ? t.reward->total : 0.0;
      rt_sum += static_cast<double>(t.retrieval_count);
      len_sum += static_cast<double>(t.action_tokens());
    }
  }
  if (m.trajectories > 0) {
    const double n = static_cast<double>(m.trajectories);
    m.mean_reward = reward_sum / n;
    m.mean_rt = rt_sum / n;
    m.mean_response_length = len_sum / n;
  }

  const auto batch = prepare_batch(policy, groups, reference);
  if (batch.empty()) throw MissingLogprobs();
  m.used_trajectories = batch.size();
  auto theta = policy.parameters();
  for (std::size_t u = 0; u < cfg.updates_per_batch; ++u) {
    const auto lg = grpo_loss_and_grad(policy, batch, cfg);
    if (u == 0) m.loss = lg.loss;
    m.kl = lg.kl;
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.learning_rate * lg.grad[i];
  }
  return m;
}

}  // namespace ikea
