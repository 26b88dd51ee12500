#pragma once

// Knowledge-boundary probing and balanced training-set construction.

#include <cstdint>
#include <string>
#include <vector>

#include "ikea/policy.hpp"
#include "ikea/task.hpp"
#include "ikea/world.hpp"

namespace ikea {

struct ProbeConfig {
  std::size_t n_samples = 5;
  std::vector<std::string> exemplars;  // three by default
  double temperature = 1.0;
  std::size_t max_tokens = 32;
};

struct ProbeSample {
  std::string answer;
  int em = 0;
  bool operator==(const ProbeSample&) const = default;
};

struct ProbeRecord {
  std::string task_id;
  std::vector<ProbeSample> samples;
};

class InsufficientPool : public Error {
 public:
  InsufficientPool(Label side, std::size_t have, std::size_t need);
  Label side() const { return side_; }

 private:
  Label side_;
};

/// "Question: ...\nAnswer: ... So the answer is X." demonstrations built from
/// the first three internal facts of the world.
std::vector<std::string> world_exemplars(const SyntheticWorld& world, std::size_t count = 3);

/// Exemplars, one per block separated by blank lines, from a text asset.
std::vector<std::string> load_exemplars(const std::string& path);

/// Exemplars followed by "Question: <q>\nAnswer:".
std::string probe_prompt(const std::vector<std::string>& exemplars, const std::string& question);

/// Answer in a probe generation: the body of an <answer> tag when present,
/// else the last non-empty line with a leading "So the answer is" removed.
std::string extract_probe_answer(const std::string& generation);

/// N direct answers (no retrieval), each scored by exact match. Sample i uses
/// seed + i.
std::vector<ProbeSample> probe_question(const Policy& policy, const TaskInstance& task,
                                        const ProbeConfig& cfg, std::uint64_t seed);

/// Easy iff any sample is correct.
Label label_question(const std::vector<ProbeSample>& probe);

/// Probes every task in parallel; task i uses seed + i * n_samples.
std::vector<ProbeRecord> probe_tasks(const Policy& policy, const std::vector<TaskInstance>& tasks,
                                     const ProbeConfig& cfg, std::uint64_t seed);

/// Copies of `tasks` labeled from the matching probe records.
std::vector<TaskInstance> apply_labels(const std::vector<TaskInstance>& tasks,
                                       const std::vector<ProbeRecord>& probes);

/// n_per_class easy and n_per_class hard tasks sampled without replacement,
/// shuffled together by `seed`.
std::vector<TaskInstance> build_balanced(const std::vector<TaskInstance>& easy,
                                         const std::vector<TaskInstance>& hard,
                                         std::size_t n_per_class, std::uint64_t seed);

}  // namespace ikea
