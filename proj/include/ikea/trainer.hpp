#pragma once

// GRPO training loop for the toy policy and the synthetic-world experiment
// setup shared by the CLI and the acceptance suite.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ikea/dataset.hpp"
#include "ikea/grpo.hpp"
#include "ikea/rollout.hpp"
#include "ikea/seeding.hpp"
#include "ikea/world.hpp"

namespace ikea {

struct TrainConfig {
  RolloutConfig rollout{};
  RewardConfig reward{};
  OptimConfig optim{};
  std::uint64_t seed = 0;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double reward = 0.0;
  double rt = 0.0;
  double resp_len = 0.0;
  double kl = 0.0;
  double loss = 0.0;
  std::optional<double> easy_rt;
  std::optional<double> hard_rt;
  /// Fraction of rollouts with at least one valid retrieval.
  double retrieval_rate = 0.0;
  std::optional<double> easy_rate;
  std::optional<double> hard_rate;
  std::optional<double> easy_em;
  std::optional<double> hard_em;
  std::size_t n_easy = 0;  // rollouts of easy tasks in the step
  std::size_t n_hard = 0;
};

/// Tasks of step `step`: batch_tasks distinct tasks drawn by (seed, step).
std::vector<std::size_t> step_task_indices(std::size_t dataset_size, std::size_t batch_tasks,
                                           std::uint64_t seed, std::size_t step);

/// Per-step log entry from scored groups.
TrainLogEntry summarize_groups(std::size_t step, const std::vector<GroupBatch>& groups);

/// Runs `cfg.optim.steps` iterations of: collect one group per sampled task
/// with the current (frozen) policy, score, standardize, update.
std::vector<TrainLogEntry> train(ToyPolicy& policy, const Environment& env,
                                 const std::vector<TaskInstance>& dataset, const TrainConfig& cfg,
                                 const std::function<void(const TrainLogEntry&)>& on_step = {});

/// Rollout-weighted averages of a log window [begin, end).
struct WindowSummary {
  double reward = 0.0;
  double retrieval_rate = 0.0;
  std::optional<double> easy_rate;
  std::optional<double> hard_rate;
  std::optional<double> easy_em;
  std::optional<double> hard_em;
};
WindowSummary summarize_window(const std::vector<TrainLogEntry>& log, std::size_t begin,
                               std::size_t end);

/// World, corpus, retrieval environment and probe exemplars for one seed.
struct ToySetup {
  WorldBundle bundle;
  std::unique_ptr<CorpusIndex> index;
  std::unique_ptr<Environment> env;
  std::vector<std::string> exemplars;
};

std::unique_ptr<ToySetup> make_toy_setup(const WorldOptions& world, std::uint64_t seed,
                                         const PromptTemplate& prompt);

enum class TrainMix { Balanced, EasyOnly, HardOnly };
std::string_view to_string(TrainMix m);
TrainMix train_mix_from_string(std::string_view s);

/// Probe-labeled single-hop tasks drawn for `mix`: n_per_class of each label
/// for Balanced, 2 * n_per_class of one label otherwise.
std::vector<TaskInstance> toy_training_set(const Policy& seeded, const ToySetup& setup,
                                           const ProbeConfig& probe, TrainMix mix,
                                           std::size_t n_per_class, std::uint64_t seed);

}  // namespace ikea
