#pragma once

// Answer matching and the knowledge-boundary aware reward.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ikea/protocol.hpp"

namespace ikea {

struct RewardConfig {
  double r_kb_plus = 0.6;
  double r_kb_minus = 0.05;
  std::size_t rt_max = 3;

  /// Requires 0 < r_kb_minus <= r_kb_plus / 4 and rt_max >= 1.
  void validate() const;
};

struct RewardBreakdown {
  bool format_valid = false;
  std::optional<int> r_ans;      // absent when the format is invalid
  std::optional<double> r_kb;    // absent when the format is invalid
  double total = -1.0;
  std::vector<std::string> format_reasons;
};

/// Lowercase, drop punctuation and the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// 1 when the normalized prediction equals any normalized gold.
int exact_match(std::string_view pred, const std::vector<std::string>& golds);

/// r_kb: r_kb_plus * (1 - min(rt, rt_max) / rt_max) when correct; otherwise 0
/// without retrieval and r_kb_minus with retrieval.
double knowledge_boundary_reward(int r_ans, std::size_t rt, const RewardConfig& cfg);

/// R = -1 for an invalid format, else r_ans + r_kb.
RewardBreakdown score_trajectory(const ParsedTrajectory& parsed, std::size_t rt,
                                 const std::vector<std::string>& golds, const RewardConfig& cfg,
                                 const FormatLimits& limits);

struct Trajectory;

/// Scores `traj` against `golds` and stores the breakdown on it.
RewardBreakdown total_reward(Trajectory& traj, const std::vector<std::string>& golds,
                             const RewardConfig& cfg, const FormatLimits& limits);

}  // namespace ikea
