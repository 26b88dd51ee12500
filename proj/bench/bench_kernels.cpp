// Serial reference vs OpenMP kernel for retrieval, rollout collection and
// the GRPO loss/gradient.

#include <benchmark/benchmark.h>

#include <random>

#include "ikea/grpo.hpp"
#include "ikea/seeding.hpp"
#include "ikea/trainer.hpp"

namespace {

using namespace ikea;

struct Workload {
  std::unique_ptr<ToySetup> setup;
  std::optional<ToyPolicy> policy;
  RolloutConfig rollout;
  std::vector<TaskInstance> tasks;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> queries;
  std::vector<PreparedTrajectory> batch;
};

const Workload& workload() {
  static const Workload w = [] {
    Workload out;
    out.setup = make_toy_setup(WorldOptions{}, 1, PromptTemplate::load_default());
    out.rollout.group_size = 8;
    SeedConfig sc;
    sc.fit.epochs = 4;
    sc.fit.learning_rate = 16.0;
    out.policy.emplace(seed_toy_policy(out.setup->bundle.world, *out.setup->env, out.rollout,
                                       out.setup->exemplars, sc));
    const auto all = single_hop_tasks(out.setup->bundle.tasks);
    for (std::size_t i = 0; i < 16; ++i) {
      out.tasks.push_back(all[i * 7 % all.size()]);
      out.seeds.push_back(1000 + i * 8);
    }
    for (const auto& [key, value] : out.setup->bundle.world.facts) out.queries.push_back(fact_query(key));
    auto groups = run_groups_serial(*out.policy, *out.setup->env, out.tasks, out.rollout, out.seeds);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& g : groups) {
      g.advantages.resize(g.trajectories.size());
      for (auto& a : g.advantages) a = n(rng);
    }
    out.batch = prepare_batch(*out.policy, groups);
    return out;
  }();
  return w;
}

void BM_RetrieveBatchSerial(benchmark::State& st) {
  const auto& w = workload();
  for (auto _ : st) benchmark::DoNotOptimize(retrieve_batch_serial(*w.setup->index, w.queries, 3));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(w.queries.size()));
}

void BM_RetrieveBatchParallel(benchmark::State& st) {
  const auto& w = workload();
  for (auto _ : st) benchmark::DoNotOptimize(retrieve_batch(*w.setup->index, w.queries, 3));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(w.queries.size()));
}

void BM_RunGroupsSerial(benchmark::State& st) {
  const auto& w = workload();
  for (auto _ : st) {
    benchmark::DoNotOptimize(run_groups_serial(*w.policy, *w.setup->env, w.tasks, w.rollout, w.seeds));
  }
}

void BM_RunGroupsParallel(benchmark::State& st) {
  const auto& w = workload();
  for (auto _ : st) benchmark::DoNotOptimize(run_groups(*w.policy, *w.setup->env, w.tasks, w.rollout, w.seeds));
}

void BM_LossGradSerial(benchmark::State& st) {
  const auto& w = workload();
  OptimConfig cfg;
  cfg.kl_coeff = 0.01;
  for (auto _ : st) benchmark::DoNotOptimize(grpo_loss_and_grad_serial(*w.policy, w.batch, cfg));
}

void BM_LossGradParallel(benchmark::State& st) {
  const auto& w = workload();
  OptimConfig cfg;
  cfg.kl_coeff = 0.01;
  for (auto _ : st) benchmark::DoNotOptimize(grpo_loss_and_grad(*w.policy, w.batch, cfg));
}

BENCHMARK(BM_RetrieveBatchSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RetrieveBatchParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RunGroupsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunGroupsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
