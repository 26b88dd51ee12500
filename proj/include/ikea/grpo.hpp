#pragma once

// Group-relative advantages, the clipped surrogate with KL penalty restricted
// to action tokens, and the policy-gradient step for the toy policy.

#include <cstdint>
#include <span>
#include <vector>

#include "ikea/rollout.hpp"
#include "ikea/toy_policy.hpp"

namespace ikea {

class GroupTooSmall : public Error {
 public:
  GroupTooSmall() : Error("group needs at least two rewards") {}
};

class EmptyMask : public Error {
 public:
  EmptyMask() : Error("loss mask has no action tokens") {}
};

class MissingLogprobs : public Error {
 public:
  MissingLogprobs() : Error("trajectory has no old log-probabilities") {}
};

struct GroupAdvantages {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  std::vector<double> advantages;
};

/// (r_i - mu) / sigma, or all zeros when sigma == 0.
GroupAdvantages group_advantages(std::span<const double> rewards);

/// Fills mu_r, sigma_r and advantages from the trajectories' total rewards.
void fill_group_statistics(GroupBatch& group);

/// -(1/sum(mask)) * sum_{mask=1} min(r_t A, clip(r_t, 1-eps, 1+eps) A),
/// r_t = exp(new_lp_t - old_lp_t).
double clipped_surrogate(std::span<const double> new_lp, std::span<const double> old_lp,
                         std::span<const std::uint8_t> mask, double advantage, double eps);

/// Masked mean of exp(ref - new) - (ref - new) - 1.
double kl_term(std::span<const double> new_lp, std::span<const double> ref_lp,
               std::span<const std::uint8_t> mask);

enum class KlReference { IterationSnapshot, InitialPolicy };

struct OptimConfig {
  double clip_eps = 0.2;
  double kl_coeff = 0.0;
  double learning_rate = 20.0;
  std::size_t steps = 200;
  std::size_t batch_tasks = 16;
  std::size_t updates_per_batch = 1;
  KlReference kl_reference = KlReference::IterationSnapshot;

  void validate() const;
};

/// Action tokens of one trajectory with everything the loss needs that does
/// not depend on the current parameters.
struct PreparedTrajectory {
  std::vector<SparseFeatures> features;
  std::vector<std::size_t> token_ids;
  std::vector<double> old_lp;
  std::vector<double> ref_lp;
  double advantage = 0.0;
};

/// Builds the loss inputs for every trajectory that carries old logprobs.
/// `reference` supplies ref logprobs for KlReference::InitialPolicy; with
/// IterationSnapshot the old logprobs are the reference.
std::vector<PreparedTrajectory> prepare_batch(const ToyPolicy& policy,
                                              const std::vector<GroupBatch>& groups,
                                              const ToyPolicy* reference = nullptr);

struct LossAndGrad {
  double loss = 0.0;
  double kl = 0.0;
  std::vector<double> grad;  // d loss / d theta
};

/// Loss = mean over trajectories of (clipped_surrogate + beta * kl_term).
/// The OpenMP kernel computes per-trajectory terms in parallel and reduces in
/// trajectory order, so it matches the serial reference bit for bit.
LossAndGrad grpo_loss_and_grad(const ToyPolicy& policy, const std::vector<PreparedTrajectory>& batch,
                               const OptimConfig& cfg);
LossAndGrad grpo_loss_and_grad_serial(const ToyPolicy& policy,
                                      const std::vector<PreparedTrajectory>& batch,
                                      const OptimConfig& cfg);
/// Loss only; used by finite-difference checks.
double grpo_loss(const ToyPolicy& policy, const std::vector<PreparedTrajectory>& batch,
                 const OptimConfig& cfg);

struct StepMetrics {
  double loss = 0.0;
  double kl = 0.0;
  double mean_reward = 0.0;
  double mean_rt = 0.0;
  double mean_response_length = 0.0;
  std::size_t trajectories = 0;
  std::size_t used_trajectories = 0;
};

/// Fills missing group statistics, then applies `updates_per_batch` gradient
/// descent updates on the loss. Throws MissingLogprobs when no trajectory can
/// contribute to the loss.
StepMetrics grpo_step(ToyPolicy& policy, std::vector<GroupBatch>& groups, const OptimConfig& cfg,
                      const ToyPolicy* reference = nullptr);

}  // namespace ikea
