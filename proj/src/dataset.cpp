#include "ikea/dataset.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "ikea/reward.hpp"

namespace ikea {

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Easy: return "easy";
    case Label::Hard: return "hard";
    case Label::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label label_from_string(std::string_view s) {
  const std::string v = to_lower(s);
  if (v == "easy") return Label::Easy;
  if (v == "hard") return Label::Hard;
  if (v == "unlabeled" || v.empty()) return Label::Unlabeled;
  throw Error("unknown label: " + std::string(s));
}

InsufficientPool::InsufficientPool(Label side, std::size_t have, std::size_t need)
    : Error("insufficient " + std::string(to_string(side)) + " pool: have " + std::to_string(have) +
            ", need " + std::to_string(need)),
      side_(side) {}

std::vector<std::string> world_exemplars(const SyntheticWorld& world, std::size_t count) {
  std::vector<std::string> out;
  for (const auto& key : world.internal_subset) {
    if (out.size() == count) break;
    if (key.second == world.relation) continue;
    const std::string v = capitalize(world.value(key));
    out.push_back("Question: " + single_hop_question(key.first, key.second) + "\nAnswer: The " +
                  key.second + " of " + capitalize(key.first) + " is " + v + ". So the answer is " +
                  v + ".");
  }
  return out;
}

std::vector<std::string> load_exemplars(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open exemplars: " + path);
  std::vector<std::string> out;
  std::string line;
  std::string block;
  auto flush = [&] {
    const auto t = trim(block);
    if (!t.empty()) out.emplace_back(t);
    block.clear();
  };
  while (std::getline(in, line)) {
    if (is_blank(line)) {
      flush();
    } else {
      block += line + "\n";
    }
  }
  flush();
  return out;
}

std::string probe_prompt(const std::vector<std::string>& exemplars, const std::string& question) {
  std::string out;
  for (const auto& ex : exemplars) out += ex + "\n\n";
  out += "Question: " + question + "\nAnswer:";
  return out;
}

std::string extract_probe_answer(const std::string& generation) {
  const auto open = generation.find(kAnswerOpen);
  if (open != std::string::npos) {
    const auto body = open + kAnswerOpen.size();
    const auto close = generation.find(kAnswerClose, body);
    return std::string(trim(std::string_view(generation).substr(
        body, close == std::string::npos ? std::string::npos : close - body)));
  }
  std::string_view last;
  std::string_view rest = generation;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = trim(rest.substr(0, nl));
    if (!line.empty()) last = line;
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  static constexpr std::string_view kScaffold = "so the answer is";
  const std::string lower = to_lower(last);
  const auto at = lower.rfind(kScaffold);
  if (at != std::string::npos) last = trim(last.substr(at + kScaffold.size()));
  if (last.size() >= 7 && to_lower(last.substr(0, 7)) == "answer:") last = trim(last.substr(7));
  while (!last.empty() && last.back() == '.') last.remove_suffix(1);
  return std::string(trim(last));
}

std::vector<ProbeSample> probe_question(const Policy& policy, const TaskInstance& task,
                                        const ProbeConfig& cfg, std::uint64_t seed) {
  if (cfg.n_samples < 1) throw Error("probe needs n_samples >= 1");
  const std::string prompt = probe_prompt(cfg.exemplars, task.question);
  std::vector<ProbeSample> out;
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    GenerationRequest req{prompt, {"\n"}, cfg.max_tokens, cfg.temperature, seed + i};
    const auto resp = policy.generate(req);
    ProbeSample s;
    s.answer = extract_probe_answer(resp.text);
    s.em = s.answer.empty() ? 0 : exact_match(s.answer, task.golds);
    out.push_back(std::move(s));
  }
  return out;
}

Label label_question(const std::vector<ProbeSample>& probe) {
  if (probe.empty()) throw Error("label_question: empty probe");
  return std::any_of(probe.begin(), probe.end(), [](const ProbeSample& s) { return s.em == 1; })
             ? Label::Easy
             : Label::Hard;
}

std::vector<ProbeRecord> probe_tasks(const Policy& policy, const std::vector<TaskInstance>& tasks,
                                     const ProbeConfig& cfg, std::uint64_t seed) {
  std::vector<ProbeRecord> out(tasks.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k].task_id = tasks[k].task_id;
      out[k].samples = probe_question(policy, tasks[k], cfg, seed + k * cfg.n_samples);
    } catch (...) {
#pragma omp critical(ikea_probe_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<TaskInstance> apply_labels(const std::vector<TaskInstance>& tasks,
                                       const std::vector<ProbeRecord>& probes) {
  std::map<std::string, const ProbeRecord*> by_id;
  for (const auto& p : probes) by_id[p.task_id] = &p;
  std::vector<TaskInstance> out = tasks;
  for (auto& t : out) {
    auto it = by_id.find(t.task_id);
    if (it == by_id.end()) throw Error("no probe record for task " + t.task_id);
    t.label = label_question(it->second->samples);
  }
  return out;
}

std::vector<TaskInstance> build_balanced(const std::vector<TaskInstance>& easy,
                                         const std::vector<TaskInstance>& hard,
                                         std::size_t n_per_class, std::uint64_t seed) {
  if (easy.size() < n_per_class) throw InsufficientPool(Label::Easy, easy.size(), n_per_class);
  if (hard.size() < n_per_class) throw InsufficientPool(Label::Hard, hard.size(), n_per_class);
  std::mt19937_64 rng(seed);
  auto take = [&](const std::vector<TaskInstance>& pool, Label label) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // Partial Fisher-Yates: the first n positions become a uniform sample.
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    std::vector<TaskInstance> out;
    for (std::size_t i = 0; i < n_per_class; ++i) {
      out.push_back(pool[idx[i]]);
      out.back().label = label;
    }
    return out;
  };
  std::vector<TaskInstance> out = take(easy, Label::Easy);
  for (auto& t : take(hard, Label::Hard)) out.push_back(std::move(t));
  for (std::size_t i = out.size(); i > 1; --i) {
    std::swap(out[i - 1], out[static_cast<std::size_t>(rng() % i)]);
  }
  return out;
}

}  // namespace ikea
