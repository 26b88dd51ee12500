#include "ikea/reward.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "ikea/rollout.hpp"

namespace ikea {

void RewardConfig::validate() const {
  if (!(r_kb_minus > 0.0)) throw Error("r_kb_minus must be > 0");
  if (r_kb_minus > r_kb_plus / 4.0) throw Error("r_kb_minus must be <= r_kb_plus / 4");
  if (rt_max < 1) throw Error("rt_max must be >= 1");
}

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  std::istringstream words(cleaned);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

int exact_match(std::string_view pred, const std::vector<std::string>& golds) {
  const auto p = normalize_answer(pred);
  return std::any_of(golds.begin(), golds.end(),
                     [&](const std::string& g) { return normalize_answer(g) == p; })
             ? 1
             : 0;
}

double knowledge_boundary_reward(int r_ans, std::size_t rt, const RewardConfig& cfg) {
  if (r_ans == 1) {
    const double used = static_cast<double>(std::min(rt, cfg.rt_max));
    return cfg.r_kb_plus * (1.0 - used / static_cast<double>(cfg.rt_max));
  }
  return rt == 0 ? 0.0 : cfg.r_kb_minus;
}

RewardBreakdown score_trajectory(const ParsedTrajectory& parsed, std::size_t rt,
                                 const std::vector<std::string>& golds, const RewardConfig& cfg,
                                 const FormatLimits& limits) {
  RewardBreakdown out;
  auto check = validate_format(parsed, limits);
  out.format_valid = check.valid;
  out.format_reasons = std::move(check.reasons);
  if (!out.format_valid) {
    out.total = -1.0;
    return out;
  }
  const int r_ans = exact_match(extract_answer(parsed), golds);
  const double r_kb = knowledge_boundary_reward(r_ans, rt, cfg);
  out.r_ans = r_ans;
  out.r_kb = r_kb;
  out.total = static_cast<double>(r_ans) + r_kb;
  return out;
}

RewardBreakdown total_reward(Trajectory& traj, const std::vector<std::string>& golds,
                             const RewardConfig& cfg, const FormatLimits& limits) {
  traj.reward = score_trajectory(traj.parsed, traj.retrieval_count, golds, cfg, limits);
  return *traj.reward;
}

}  // namespace ikea
