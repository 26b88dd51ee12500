#include "ikea/trainer.hpp"

#include <algorithm>
#include <random>

namespace ikea {

std::vector<std::size_t> step_task_indices(std::size_t dataset_size, std::size_t batch_tasks,
                                           std::uint64_t seed, std::size_t step) {
  std::vector<std::size_t> idx(dataset_size);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t n = std::min(batch_tasks, dataset_size);
  std::uint64_t state = splitmix64(seed ^ splitmix64(0x7a11ULL + step));
  for (std::size_t i = 0; i < n; ++i) {
    state = splitmix64(state);
    const std::size_t j = i + static_cast<std::size_t>(state % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

TrainLogEntry summarize_groups(std::size_t step, const std::vector<GroupBatch>& groups) {
  TrainLogEntry e;
  e.step = step;
  struct Acc {
    double rt = 0, searched = 0, em = 0;
    std::size_t n = 0;
  } easy, hard, all;
  double reward = 0.0;
  double len = 0.0;
  for (const auto& g : groups) {
    for (const auto& t : g.trajectories) {
      const auto rt = static_cast<double>(count_valid_retrievals(t));
      const double searched = rt > 0 ? 1.0 : 0.0;
      const double em = t.reward && t.reward->r_ans ? *t.reward->r_ans : 0.0;
      reward += t.reward ? t.reward->total : 0.0;
      len += static_cast<double>(t.action_tokens());
      for (Acc* a : {&all, g.task.label == Label::Easy ? &easy : g.task.label == Label::Hard ? &hard : nullptr}) {
        if (a == nullptr) continue;
        a->rt += rt;
        a->searched += searched;
        a->em += em;
        ++a->n;
      }
    }
  }
  if (all.n == 0) return e;
  const double n = static_cast<double>(all.n);
  e.reward = reward / n;
  e.resp_len = len / n;
  e.rt = all.rt / n;
  e.retrieval_rate = all.searched / n;
  e.n_easy = easy.n;
  e.n_hard = hard.n;
  if (easy.n > 0) {
    e.easy_rt = easy.rt / static_cast<double>(easy.n);
    e.easy_rate = easy.searched / static_cast<double>(easy.n);
    e.easy_em = easy.em / static_cast<double>(easy.n);
  }
  if (hard.n > 0) {
    e.hard_rt = hard.rt / static_cast<double>(hard.n);
    e.hard_rate = hard.searched / static_cast<double>(hard.n);
    e.hard_em = hard.em / static_cast<double>(hard.n);
  }
  return e;
}

std::vector<TrainLogEntry> train(ToyPolicy& policy, const Environment& env,
                                 const std::vector<TaskInstance>& dataset, const TrainConfig& cfg,
                                 const std::function<void(const TrainLogEntry&)>& on_step) {
  std::vector<TrainLogEntry> log;
  if (cfg.optim.steps == 0) return log;
  if (dataset.empty()) throw Error("train: empty dataset");
  cfg.rollout.validate();
  cfg.optim.validate();

  std::optional<ToyPolicy> initial;
  if (cfg.optim.kl_reference == KlReference::InitialPolicy) initial.emplace(policy);
  const FormatLimits limits = cfg.rollout.limits();

  for (std::size_t step = 0; step < cfg.optim.steps; ++step) {
    std::vector<TaskInstance> tasks;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i : step_task_indices(dataset.size(), cfg.optim.batch_tasks, cfg.seed, step)) {
      tasks.push_back(dataset[i]);
      seeds.push_back(splitmix64(cfg.seed ^ splitmix64((step << 20) + i)));
    }
    std::vector<GroupBatch> groups;
    {
      const ToyPolicy& old_policy = policy;  // frozen while collecting
      groups = run_groups(old_policy, env, tasks, cfg.rollout, seeds);
    }
    for (auto& g : groups) {
      for (auto& t : g.trajectories) total_reward(t, g.task.golds, cfg.reward, limits);
      fill_group_statistics(g);
    }
    TrainLogEntry entry = summarize_groups(step, groups);
    const StepMetrics m = grpo_step(policy, groups, cfg.optim, initial ? &*initial : nullptr);
    entry.kl = m.kl;
    entry.loss = m.loss;
    if (on_step) on_step(entry);
    log.push_back(std::move(entry));
  }
  return log;
}

WindowSummary summarize_window(const std::vector<TrainLogEntry>& log, std::size_t begin,
                               std::size_t end) {
  WindowSummary s;
  end = std::min(end, log.size());
  double n_all = 0, n_easy = 0, n_hard = 0;
  double easy_rate = 0, hard_rate = 0, easy_em = 0, hard_em = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& e = log[i];
    const double n = static_cast<double>(e.n_easy + e.n_hard);
    const double w = n > 0 ? n : 1.0;
    s.reward += e.reward * w;
    s.retrieval_rate += e.retrieval_rate * w;
    n_all += w;
    if (e.easy_rate) {
      const double ne = static_cast<double>(e.n_easy);
      easy_rate += *e.easy_rate * ne;
      easy_em += *e.easy_em * ne;
      n_easy += ne;
    }
    if (e.hard_rate) {
      const double nh = static_cast<double>(e.n_hard);
      hard_rate += *e.hard_rate * nh;
      hard_em += *e.hard_em * nh;
      n_hard += nh;
    }
  }
  if (n_all > 0) {
    s.reward /= n_all;
    s.retrieval_rate /= n_all;
  }
  if (n_easy > 0) {
    s.easy_rate = easy_rate / n_easy;
    s.easy_em = easy_em / n_easy;
  }
  if (n_hard > 0) {
    s.hard_rate = hard_rate / n_hard;
    s.hard_em = hard_em / n_hard;
  }
  return s;
}

std::unique_ptr<ToySetup> make_toy_setup(const WorldOptions& world, std::uint64_t seed,
                                         const PromptTemplate& prompt) {
  auto s = std::make_unique<ToySetup>();
  s->bundle = generate_world(seed, world);
  s->index = std::make_unique<CorpusIndex>(index_corpus(s->bundle.docs));
  s->env = std::make_unique<Environment>(*s->index, prompt);
  s->exemplars = world_exemplars(s->bundle.world);
  return s;
}

std::string_view to_string(TrainMix m) {
  switch (m) {
    case TrainMix::Balanced: return "balanced";
    case TrainMix::EasyOnly: return "easy";
    case TrainMix::HardOnly: return "hard";
  }
  return "balanced";
}

TrainMix train_mix_from_string(std::string_view s) {
  const std::string v = to_lower(s);
  if (v == "balanced" || v == "mixed") return TrainMix::Balanced;
  if (v == "easy") return TrainMix::EasyOnly;
  if (v == "hard") return TrainMix::HardOnly;
  throw Error("unknown training mix: " + std::string(s));
}

std::vector<TaskInstance> toy_training_set(const Policy& seeded, const ToySetup& setup,
                                           const ProbeConfig& probe, TrainMix mix,
                                           std::size_t n_per_class, std::uint64_t seed) {
  const auto pool = single_hop_tasks(setup.bundle.tasks);
  ProbeConfig pc = probe;
  if (pc.exemplars.empty()) pc.exemplars = setup.exemplars;
  const auto labeled = apply_labels(pool, probe_tasks(seeded, pool, pc, seed));
  std::vector<TaskInstance> easy, hard;
  for (const auto& t : labeled) (t.label == Label::Easy ? easy : hard).push_back(t);
  switch (mix) {
    case TrainMix::Balanced:
      return build_balanced(easy, hard, n_per_class, seed);
    case TrainMix::EasyOnly:
    case TrainMix::HardOnly: {
      const Label side = mix == TrainMix::EasyOnly ? Label::Easy : Label::Hard;
      auto chosen = side == Label::Easy ? easy : hard;
      const std::size_t need = 2 * n_per_class;
      if (chosen.size() < need) throw InsufficientPool(side, chosen.size(), need);
      std::mt19937_64 rng(seed);
      for (std::size_t i = chosen.size(); i > 1; --i) {
        std::swap(chosen[i - 1], chosen[static_cast<std::size_t>(rng() % i)]);
      }
      chosen.resize(need);
      return chosen;
    }
  }
  return {};
}

}  // namespace ikea
