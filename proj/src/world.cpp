#include "ikea/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace ikea {

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                   "s", "t", "v", "z", "br", "dr", "kr", "st", "th", "vl"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "y"};

const std::vector<std::string> kAttributes = {"capital", "leader", "river",
                                              "currency", "language", "mountain"};

// Pronounceable names, unique across everything drawn from one generator.
class NameGen {
 public:
  explicit NameGen(std::mt19937_64& rng) : rng_(rng) {
    for (const auto& a : kAttributes) used_.insert(a);
    for (const char* w : {"ally", "the", "of", "is", "what", "title", "recall", "read"}) used_.insert(w);
  }

  std::string next(std::size_t syllables) {
    while (true) {
      std::string name;
      for (std::size_t i = 0; i < syllables; ++i) {
        name += kOnsets[pick(std::size(kOnsets))];
        name += kVowels[pick(std::size(kVowels))];
      }
      name += kOnsets[pick(std::size(kOnsets))];
      if (used_.insert(name).second) return name;
    }
  }

 private:
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  std::mt19937_64& rng_;
  std::unordered_set<std::string> used_;
};

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng() % i)]);
  }
}

}  // namespace

std::string capitalize(const std::string& s) {
  std::string out = s;
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

std::string single_hop_question(const std::string& entity, const std::string& attribute) {
  return "What is the " + attribute + " of " + capitalize(entity) + "?";
}

std::string two_hop_question(const std::string& entity, const std::string& relation,
                             const std::string& attribute) {
  return "What is the " + attribute + " of the " + relation + " of " + capitalize(entity) + "?";
}

std::string fact_query(const FactKey& key) { return key.second + " " + key.first; }

std::string fact_doc_id(const SyntheticWorld& world, const FactKey& key) {
  auto it = world.facts.find(key);
  const auto idx = static_cast<std::size_t>(std::distance(world.facts.begin(), it));
  char buf[32];
  std::snprintf(buf, sizeof buf, "d%05zu", idx);
  return buf;
}

WorldBundle generate_world(std::uint64_t seed, const WorldOptions& opts) {
  if (opts.n_entities < 2) throw Error("generate_world: n_entities must be >= 2");
  std::mt19937_64 rng(seed);
  NameGen names(rng);
  WorldBundle out;
  SyntheticWorld& w = out.world;
  w.attributes = kAttributes;

  for (std::size_t i = 0; i < opts.n_entities; ++i) w.entities.push_back(names.next(2));
  for (std::size_t i = 0; i < opts.n_drill_entities; ++i) w.drill_entities.push_back(names.next(2));

  const std::size_t n_plain = opts.n_entities * w.attributes.size();
  for (std::size_t i = 0; i < n_plain; ++i) w.values.push_back(names.next(1));
  std::vector<std::string> pool = w.values;
  shuffle(pool, rng);

  std::size_t next_value = 0;
  for (std::size_t e = 0; e < w.entities.size(); ++e) {
    for (const auto& attr : w.attributes) w.facts[{w.entities[e], attr}] = pool[next_value++];
    std::size_t other = static_cast<std::size_t>(rng() % (w.entities.size() - 1));
    if (other >= e) ++other;
    w.facts[{w.entities[e], w.relation}] = w.entities[other];
  }

  std::vector<std::size_t> order(w.entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  const auto known = static_cast<std::size_t>(
      std::lround(std::clamp(opts.internal_fraction, 0.0, 1.0) * static_cast<double>(order.size())));
  for (std::size_t i = 0; i < known; ++i) {
    const auto& ent = w.entities[order[i]];
    for (const auto& [key, value] : w.facts) {
      if (key.first == ent) w.internal_subset.insert(key);
    }
  }

  for (const auto& [key, value] : w.facts) {
    out.docs.push_back(Document{fact_doc_id(w, key), capitalize(key.first) + " " + key.second,
                                "The " + key.second + " of " + capitalize(key.first) + " is " +
                                    capitalize(value) + "."});
  }

  auto label_for = [&](const std::vector<FactKey>& req) {
    return std::all_of(req.begin(), req.end(), [&](const FactKey& k) { return w.is_internal(k); })
               ? Label::Easy
               : Label::Hard;
  };

  std::size_t id = 0;
  auto task_id = [&id](const char* prefix) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu", prefix, id++);
    return std::string(buf);
  };

  for (const auto& [key, value] : w.facts) {
    WorldTask t;
    t.required = {key};
    t.task = TaskInstance{task_id("s"), single_hop_question(key.first, key.second),
                          {capitalize(value)}, label_for(t.required), std::string(kSingleHopSource)};
    out.tasks.push_back(std::move(t));
  }
  for (const auto& ent : w.entities) {
    const auto& target = w.facts.at({ent, w.relation});
    std::vector<std::string> attrs = w.attributes;
    shuffle(attrs, rng);
    for (std::size_t i = 0; i < std::min(opts.two_hop_per_entity, attrs.size()); ++i) {
      WorldTask t;
      t.required = {{ent, w.relation}, {target, attrs[i]}};
      t.task = TaskInstance{task_id("m"), two_hop_question(ent, w.relation, attrs[i]),
                            {capitalize(w.facts.at({target, attrs[i]}))}, label_for(t.required),
                            std::string(kTwoHopSource)};
      out.tasks.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<TaskInstance> plain_tasks(const std::vector<WorldTask>& tasks) {
  std::vector<TaskInstance> out;
  for (const auto& t : tasks) out.push_back(t.task);
  return out;
}

std::vector<TaskInstance> single_hop_tasks(const std::vector<WorldTask>& tasks) {
  std::vector<TaskInstance> out;
  for (const auto& t : tasks) {
    if (t.task.source == kSingleHopSource) out.push_back(t.task);
  }
  return out;
}

}  // namespace ikea
