#pragma once

// Pre-RL seeding of the toy policy on a synthetic world. Facts in the
// internal subset are taught directly (answer without search, and in probe
// format); the protocol, query writing and reading skills are taught on the
// same facts and on placeholder drill entities, with searching and answering
// demonstrated equally often so the initial policy has no search preference.

#include <cstdint>
#include <vector>

#include "ikea/rollout.hpp"
#include "ikea/toy_policy.hpp"
#include "ikea/world.hpp"

namespace ikea {

struct SeedConfig {
  std::size_t dim = 16384;
  std::size_t drill_rounds = 2;  // passes over the value pool for reading drills
  bool include_drills = true;
  /// Share of direct-answer demonstration weight given to a wrong value, so
  /// internal recall is imperfect.
  double internal_noise = 0.0;
  /// Weight of query-writing demonstrations for facts outside the internal
  /// subset. They start after the search tag, so they neither show the
  /// answer nor teach when to search.
  double unknown_query_weight = 0.3;
  SupervisedConfig fit{32, 32.0, 0};
};

std::vector<std::string> toy_vocabulary(const SyntheticWorld& world);

/// Transcript pieces the seeded policy emits, as token texts.
std::vector<std::string> direct_turn(const std::string& value);
std::vector<std::string> search_turn(const std::string& attribute, const std::string& entity);
std::vector<std::string> read_turn(const std::string& value);

std::vector<Demonstration> seeding_demonstrations(const SyntheticWorld& world, const Environment& env,
                                                  const RolloutConfig& rollout,
                                                  const std::vector<std::string>& probe_exemplars,
                                                  const SeedConfig& cfg);

/// Fresh policy over the world's vocabulary fitted to the seeding demonstrations.
ToyPolicy seed_toy_policy(const SyntheticWorld& world, const Environment& env,
                          const RolloutConfig& rollout, const std::vector<std::string>& probe_exemplars,
                          const SeedConfig& cfg);

}  // namespace ikea
