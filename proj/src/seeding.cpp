#include "ikea/seeding.hpp"

#include <random>

#include "ikea/dataset.hpp"

namespace ikea {

namespace {

std::string with_space(std::string_view s) { return " " + std::string(s); }

std::string join_texts(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) out += t;
  return out;
}

std::string context_text(const std::string& body) {
  return make_segment(SegmentKind::Context, body, "\n").text();
}

}  // namespace

std::vector<std::string> toy_vocabulary(const SyntheticWorld& world) {
  std::vector<std::string> v = {std::string(kThinkOpen),  std::string(kThinkClose),
                                std::string(kSearchOpen), std::string(kSearchClose),
                                std::string(kAnswerOpen), std::string(kAnswerClose),
                                "recall",                 "read",
                                std::string(kEndSymbol)};
  for (const auto& a : world.attributes) v.push_back(a);
  v.push_back(world.relation);
  for (const auto& e : world.entities) v.push_back(e);
  for (const auto& e : world.drill_entities) v.push_back(e);
  for (const auto& x : world.values) v.push_back(x);
  return v;
}

std::vector<std::string> direct_turn(const std::string& value) {
  return {with_space(kThinkOpen), " recall",          with_space(kThinkClose),
          with_space(kAnswerOpen), with_space(value), with_space(kAnswerClose)};
}

std::vector<std::string> search_turn(const std::string& attribute, const std::string& entity) {
  return {with_space(kThinkOpen),  " recall",           with_space(kThinkClose), with_space(kSearchOpen),
          with_space(attribute),   with_space(entity),  with_space(kSearchClose)};
}

std::vector<std::string> read_turn(const std::string& value) {
  return {with_space(kThinkOpen),  " read",            with_space(kThinkClose),
          with_space(kAnswerOpen), with_space(value),  with_space(kAnswerClose)};
}

std::vector<Demonstration> seeding_demonstrations(const SyntheticWorld& world, const Environment& env,
                                                  const RolloutConfig& rollout,
                                                  const std::vector<std::string>& probe_exemplars,
                                                  const SeedConfig& cfg) {
  std::vector<Demonstration> demos;
  const auto& prompt = env.prompt();

  auto add_search_pair = [&](const std::string& question, const std::string& attr,
                             const std::string& entity, const std::string& value,
                             const std::string& ctx_body) {
    const std::string state = prompt.render(question, rollout.max_retrievals);
    const auto first = search_turn(attr, entity);
    demos.push_back({state, first});
    demos.push_back({state + join_texts(first) + context_text(ctx_body), read_turn(value)});
  };

  std::mt19937_64 noise_rng(cfg.fit.seed ^ 0x401eULL);
  const double keep = 1.0 - cfg.internal_noise;
  for (const auto& key : world.internal_subset) {
    const std::string& value = world.value(key);
    const std::string question = single_hop_question(key.first, key.second);
    const std::string agent_state = prompt.render(question, rollout.max_retrievals);
    const std::string probe_state = probe_prompt(probe_exemplars, question);
    demos.push_back({agent_state, direct_turn(value), keep});
    demos.push_back({probe_state, {with_space(value), std::string(kEndSymbol)}, keep});
    if (cfg.internal_noise > 0.0) {
      const auto& pool = key.second == world.relation ? world.entities : world.values;
      std::string wrong = pool[noise_rng() % pool.size()];
      while (wrong == value) wrong = pool[noise_rng() % pool.size()];
      demos.push_back({agent_state, direct_turn(wrong), cfg.internal_noise});
      demos.push_back({probe_state, {with_space(wrong), std::string(kEndSymbol)}, cfg.internal_noise});
    }
    const auto hits = env.index().size() > 0
                          ? retrieve(env.index(), fact_query(key), rollout.k_docs)
                          : RetrievalResult{};
    add_search_pair(question, key.second, key.first, value,
                    observation_body(hits, env.index(), rollout.max_obs_chars));
  }

  if (cfg.unknown_query_weight > 0.0) {
    for (const auto& [key, value] : world.facts) {
      if (world.is_internal(key)) continue;
      // Only the query is shown, not the decision to search.
      const auto turn = search_turn(key.second, key.first);
      const std::vector<std::string> head(turn.begin(), turn.begin() + 4);
      const std::vector<std::string> query(turn.begin() + 4, turn.end());
      demos.push_back({prompt.render(single_hop_question(key.first, key.second), rollout.max_retrievals) +
                           join_texts(head),
                       query, cfg.unknown_query_weight});
    }
  }

  if (cfg.include_drills && !world.drill_entities.empty()) {
    std::mt19937_64 rng(cfg.fit.seed ^ 0x5eedULL);
    std::vector<std::pair<std::string, std::string>> drills;  // (attribute, value)
    std::size_t k = 0;
    for (const auto& value : world.values) {
      drills.emplace_back(world.attributes[(k++ / world.drill_entities.size()) % world.attributes.size()], value);
    }
    for (const auto& e : world.entities) drills.emplace_back(world.relation, e);
    k = 0;
    for (std::size_t round = 0; round < cfg.drill_rounds; ++round) {
      for (const auto& [attr, value] : drills) {
        const auto& ent = world.drill_entities[k++ % world.drill_entities.size()];
        const std::string question = single_hop_question(ent, attr);
        Document doc{"drill", capitalize(ent) + " " + attr,
                     "The " + attr + " of " + capitalize(ent) + " is " + capitalize(value) + "."};
        std::string body = observation_block(doc);
        // Distractors: real blocks sharing the attribute, as a retriever would return.
        const auto hits = retrieve(env.index(), attr + " " + world.entities[rng() % world.entities.size()],
                                   rollout.k_docs > 0 ? rollout.k_docs - 1 : 0);
        for (const auto& h : hits.hits) {
          if (const Document* d = env.index().find(h.doc_id)) body += observation_block(*d);
        }
        if (body.size() > rollout.max_obs_chars) body.resize(rollout.max_obs_chars);
        add_search_pair(question, attr, ent, value, body);
        demos.push_back({prompt.render(question, rollout.max_retrievals), direct_turn(value)});
      }
    }
  }
  return demos;
}

ToyPolicy seed_toy_policy(const SyntheticWorld& world, const Environment& env,
                          const RolloutConfig& rollout, const std::vector<std::string>& probe_exemplars,
                          const SeedConfig& cfg) {
  ToyPolicy policy(toy_vocabulary(world), cfg.dim);
  supervised_fit(policy, seeding_demonstrations(world, env, rollout, probe_exemplars, cfg), cfg.fit);
  return policy;
}

}  // namespace ikea
