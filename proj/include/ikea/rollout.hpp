#pragma once

// Multi-turn agent/environment loop and trajectory assembly.

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ikea/corpus.hpp"
#include "ikea/policy.hpp"
#include "ikea/prompt.hpp"
#include "ikea/protocol.hpp"
#include "ikea/reward.hpp"
#include "ikea/task.hpp"

namespace ikea {

struct RolloutConfig {
  std::size_t max_turns = 6;
  std::size_t max_retrievals = 4;  // environment hard cap
  std::size_t rt_max = 3;          // reward normalizer
  std::size_t k_docs = 3;
  std::size_t max_obs_chars = 1024;
  std::size_t group_size = 16;
  std::size_t max_new_tokens = 48;  // per turn
  double temperature = 1.0;

  /// Throws Error when an invariant is violated.
  void validate() const;
  FormatLimits limits() const { return FormatLimits{max_turns}; }
};

/// Retriever plus prompt. Counts retrieval calls so callers can prove a code
/// path never searched.
class Environment {
 public:
  Environment(const CorpusIndex& index, PromptTemplate prompt)
      : index_(&index), prompt_(std::move(prompt)) {}

  const CorpusIndex& index() const { return *index_; }
  const PromptTemplate& prompt() const { return prompt_; }

  RetrievalResult search(std::string_view query, std::size_t k) const;
  std::size_t retrieval_calls() const { return calls_.load(); }

 private:
  const CorpusIndex* index_;
  PromptTemplate prompt_;
  mutable std::atomic<std::size_t> calls_{0};
};

struct Trajectory {
  TaskInstance task;
  std::string prompt;
  ParsedTrajectory parsed;
  std::vector<std::string> tokens;
  std::vector<std::uint8_t> loss_mask;
  std::optional<std::vector<double>> old_logprobs;  // 0.0 at observation tokens
  std::size_t retrieval_count = 0;
  std::optional<RewardBreakdown> reward;
  std::uint64_t seed = 0;

  std::size_t action_tokens() const;
};

struct GroupBatch {
  TaskInstance task;
  std::string group_id;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
  double mu_r = 0.0;
  double sigma_r = 0.0;
  std::vector<double> advantages;
};

inline const std::vector<std::string> kRolloutStops = {std::string(kSearchClose),
                                                       std::string(kAnswerClose)};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of turn `turn` within a rollout seeded with `seed`.
std::uint64_t turn_seed(std::uint64_t seed, std::size_t turn);

Trajectory run_rollout(const Policy& policy, const Environment& env, const TaskInstance& task,
                       const RolloutConfig& cfg, std::uint64_t seed);

/// G rollouts with seeds seed, seed+1, ...; statistics are left empty.
GroupBatch run_group(const Policy& policy, const Environment& env, const TaskInstance& task,
                     const RolloutConfig& cfg, std::uint64_t seed);

/// One group per task, group i seeded with seeds[i]. Rollouts run in parallel
/// (OpenMP); results equal the serial reference exactly.
std::vector<GroupBatch> run_groups(const Policy& policy, const Environment& env,
                                   const std::vector<TaskInstance>& tasks, const RolloutConfig& cfg,
                                   const std::vector<std::uint64_t>& seeds);
std::vector<GroupBatch> run_groups_serial(const Policy& policy, const Environment& env,
                                          const std::vector<TaskInstance>& tasks,
                                          const RolloutConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds);

/// Search segments with a non-blank query whose observation came from the
/// retriever (over-cap searches get the limit sentinel instead).
std::size_t count_valid_retrievals(const ParsedTrajectory& parsed);
inline std::size_t count_valid_retrievals(const Trajectory& t) { return count_valid_retrievals(t.parsed); }

}  // namespace ikea
