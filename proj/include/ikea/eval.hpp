#pragma once

// Greedy evaluation runs and EM/RT reports split by (source, label).

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ikea/rollout.hpp"

namespace ikea {

struct SubsetStats {
  double em_mean = 0.0;
  double rt_mean = 0.0;
  std::size_t n = 0;
  bool operator==(const SubsetStats&) const = default;
};

struct EvalReport {
  std::map<std::pair<std::string, Label>, SubsetStats> per_subset;
  double overall_em = 0.0;  // unweighted mean over subsets
  double overall_rt = 0.0;
  bool operator==(const EvalReport&) const = default;
};

struct EvalRun {
  EvalReport report;
  std::vector<Trajectory> trajectories;  // task order
};

/// One temperature-0 rollout per task (task i seeded with seed + i),
/// scored with `reward` for EM.
EvalRun evaluate_with_trajectories(const Policy& policy, const Environment& env,
                                   const std::vector<TaskInstance>& tasks, const RolloutConfig& cfg,
                                   std::uint64_t seed, const RewardConfig& reward = {});
EvalReport evaluate(const Policy& policy, const Environment& env, const std::vector<TaskInstance>& tasks,
                    const RolloutConfig& cfg, std::uint64_t seed);

/// Aggregation of already-scored trajectories.
EvalReport aggregate(const std::vector<Trajectory>& trajectories);

enum class ReportFormat { Table, Jsonl };

std::string emit_report(const EvalReport& report, ReportFormat format);
/// Inverse of the jsonl form.
EvalReport parse_report_jsonl(const std::string& text);

}  // namespace ikea
