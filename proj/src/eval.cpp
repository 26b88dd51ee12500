#include "ikea/eval.hpp"

#include <cstdio>
#include <exception>
#include <sstream>

#include <json.hpp>

namespace ikea {

EvalRun evaluate_with_trajectories(const Policy& policy, const Environment& env,
                                   const std::vector<TaskInstance>& tasks, const RolloutConfig& cfg,
                                   std::uint64_t seed, const RewardConfig& reward) {
  RolloutConfig greedy = cfg;
  greedy.temperature = 0.0;
  EvalRun run;
  run.trajectories.resize(tasks.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      auto t = run_rollout(policy, env, tasks[k], greedy, seed + k);
      total_reward(t, tasks[k].golds, reward, greedy.limits());
      run.trajectories[k] = std::move(t);
    } catch (...) {
#pragma omp critical(ikea_eval_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  run.report = aggregate(run.trajectories);
  return run;
}

EvalReport evaluate(const Policy& policy, const Environment& env, const std::vector<TaskInstance>& tasks,
                    const RolloutConfig& cfg, std::uint64_t seed) {
  return evaluate_with_trajectories(policy, env, tasks, cfg, seed).report;
}

EvalReport aggregate(const std::vector<Trajectory>& trajectories) {
  struct Acc {
    double em = 0.0, rt = 0.0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, Label>, Acc> acc;
  for (const auto& t : trajectories) {
    auto& a = acc[{t.task.source, t.task.label}];
    a.em += t.reward && t.reward->r_ans ? *t.reward->r_ans : 0;
    a.rt += static_cast<double>(count_valid_retrievals(t));
    ++a.n;
  }
  EvalReport r;
  for (const auto& [key, a] : acc) {
    const double n = static_cast<double>(a.n);
    r.per_subset[key] = SubsetStats{a.em / n, a.rt / n, a.n};
    r.overall_em += a.em / n;
    r.overall_rt += a.rt / n;
  }
  if (!r.per_subset.empty()) {
    r.overall_em /= static_cast<double>(r.per_subset.size());
    r.overall_rt /= static_cast<double>(r.per_subset.size());
  }
  return r;
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::Jsonl) {
    for (const auto& [key, s] : report.per_subset) {
      nlohmann::ordered_json j;
      j["subset"] = key.first + "/" + std::string(to_string(key.second));
      j["source"] = key.first;
      j["label"] = std::string(to_string(key.second));
      j["em"] = s.em_mean;
      j["rt"] = s.rt_mean;
      j["n"] = s.n;
      out << j.dump() << "\n";
    }
    nlohmann::ordered_json j;
    j["subset"] = "overall";
    j["em"] = report.overall_em;
    j["rt"] = report.overall_rt;
    out << j.dump() << "\n";
    return out.str();
  }

  std::size_t width = std::string("overall").size();
  for (const auto& [key, s] : report.per_subset) {
    width = std::max(width, key.first.size() + 1 + to_string(key.second).size());
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %6s\n", static_cast<int>(width), "subset", "EM", "RT", "n");
  out << buf;
  for (const auto& [key, s] : report.per_subset) {
    const std::string name = key.first + "/" + std::string(to_string(key.second));
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %6zu\n", static_cast<int>(width), name.c_str(),
                  s.em_mean, s.rt_mean, s.n);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f  %6s\n", static_cast<int>(width), "overall",
                report.overall_em, report.overall_rt, "");
  out << buf;
  return out.str();
}

EvalReport parse_report_jsonl(const std::string& text) {
  EvalReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("subset") == "overall") {
      r.overall_em = j.at("em").get<double>();
      r.overall_rt = j.at("rt").get<double>();
      continue;
    }
    SubsetStats s{j.at("em").get<double>(), j.at("rt").get<double>(), j.at("n").get<std::size_t>()};
    r.per_subset[{j.at("source").get<std::string>(), label_from_string(j.at("label").get<std::string>())}] = s;
  }
  return r;
}

}  // namespace ikea
