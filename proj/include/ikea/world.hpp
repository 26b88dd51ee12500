#pragma once

// Synthetic fact world: a desk-scale stand-in for open-domain QA. Entities
// carry plain attributes (one unique value per fact) and one relation
// attribute whose value is another entity, which yields two-hop questions.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ikea/corpus.hpp"
#include "ikea/task.hpp"

namespace ikea {

using FactKey = std::pair<std::string, std::string>;  // (entity, attribute)

struct WorldTask {
  TaskInstance task;
  std::vector<FactKey> required;  // facts needed to answer, in hop order
};

struct SyntheticWorld {
  std::vector<std::string> entities;    // lowercase names
  std::vector<std::string> attributes;  // plain attributes
  std::string relation = "ally";
  std::map<FactKey, std::string> facts;  // values are lowercase
  std::set<FactKey> internal_subset;
  /// Placeholder entities that never occur in facts; reserved for generic
  /// skill demonstrations when seeding a policy.
  std::vector<std::string> drill_entities;
  std::vector<std::string> values;  // pool of plain-attribute values

  const std::string& value(const FactKey& key) const { return facts.at(key); }
  bool is_internal(const FactKey& key) const { return internal_subset.count(key) > 0; }
};

struct WorldOptions {
  std::size_t n_entities = 40;
  double internal_fraction = 0.5;
  std::size_t two_hop_per_entity = 1;
  std::size_t n_drill_entities = 8;
};

struct WorldBundle {
  SyntheticWorld world;
  std::vector<WorldTask> tasks;
  std::vector<Document> docs;
};

/// Deterministic in `seed`. The internal subset is a boundary over entities:
/// round(internal_fraction * n_entities) entities are known in full.
WorldBundle generate_world(std::uint64_t seed, const WorldOptions& opts);

std::string capitalize(const std::string& s);
std::string single_hop_question(const std::string& entity, const std::string& attribute);
std::string two_hop_question(const std::string& entity, const std::string& relation,
                             const std::string& attribute);
/// Query whose top hit is the fact's own document.
std::string fact_query(const FactKey& key);
std::string fact_doc_id(const SyntheticWorld& world, const FactKey& key);

std::vector<TaskInstance> plain_tasks(const std::vector<WorldTask>& tasks);
/// Tasks whose source marks them as single-hop.
std::vector<TaskInstance> single_hop_tasks(const std::vector<WorldTask>& tasks);

inline constexpr std::string_view kSingleHopSource = "synthetic-1hop";
inline constexpr std::string_view kTwoHopSource = "synthetic-2hop";

}  // namespace ikea
