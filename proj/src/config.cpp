#include "ikea/config.hpp"

#include <charconv>
#include <sstream>

#include "ikea/io.hpp"

namespace ikea {

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> k = {
      {"seed", "0", "root seed for all randomness"},
      {"workers", "0", "OpenMP threads; 0 uses every core"},
      {"policy", "", "scripted:<file> | toy:<file> | remote:<url>"},
      {"prompt", "", "system prompt template; empty uses the bundled asset"},
      {"corpus", "", "corpus JSONL"},
      {"tasks", "", "task JSONL"},
      {"input", "", "input file"},
      {"out", "", "output file"},
      {"out_dir", "", "output directory"},
      {"probe_cache", "", "probe cache JSONL"},
      {"exemplars", "", "probe exemplar text; empty uses the bundled asset"},
      {"log", "", "training log JSONL"},
      {"run_dir", ".", "directory for run manifests"},
      {"format", "table", "report format: table | jsonl"},
      {"max_turns", "6", "agent turns per rollout"},
      {"max_retrievals", "4", "environment retrieval cap"},
      {"rt_max", "3", "reward normalizer for retrieval count"},
      {"k_docs", "3", "documents per retrieval"},
      {"max_obs_chars", "1024", "observation size limit"},
      {"group_size", "16", "rollouts per task"},
      {"max_new_tokens", "48", "tokens per agent turn"},
      {"temperature", "1.0", "rollout sampling temperature"},
      {"r_kb_plus", "0.6", "knowledge-boundary reward for correct answers"},
      {"r_kb_minus", "0.05", "knowledge-boundary reward for wrong answers after retrieval"},
      {"reward_ablation", "none", "none | no_kb | no_kb_minus"},
      {"clip_eps", "0.2", "surrogate clip range"},
      {"kl_coeff", "0.0", "KL penalty weight"},
      {"kl_reference", "snapshot", "snapshot | initial"},
      {"learning_rate", "20", "gradient step size"},
      {"steps", "200", "training iterations"},
      {"batch_tasks", "16", "tasks per training iteration"},
      {"updates_per_batch", "1", "gradient updates per collected batch"},
      {"n_samples", "5", "probe samples per question"},
      {"probe_temperature", "1.0", "probe sampling temperature"},
      {"n_per_class", "100", "easy and hard tasks in a balanced set"},
      {"train_mix", "balanced", "balanced | easy | hard"},
      {"n_entities", "40", "synthetic world entities"},
      {"internal_fraction", "0.5", "share of entities the seeded toy policy knows"},
      {"two_hop_per_entity", "1", "two-hop questions per entity"},
      {"n_drill_entities", "8", "placeholder entities for seeding drills"},
      {"toy_dim", "16384", "toy policy feature buckets"},
      {"seed_epochs", "32", "supervised seeding epochs"},
      {"seed_lr", "32", "supervised seeding learning rate"},
      {"drill_rounds", "2", "reading drills per value"},
      {"unknown_query_weight", "0.3", "weight of query-writing demonstrations for facts the policy does not know"},
      {"internal_noise", "0", "share of direct-answer demonstration weight given to a wrong value"},
  };
  return k;
}

bool RunConfig::is_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return true;
  }
  return false;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) {
    values_[k.name] = k.default_value;
    origin_[k.name] = "default";
  }
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& origin) {
  if (!is_key(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
  origin_[key] = origin;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    }
    set(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))), origin);
  }
}

void RunConfig::merge_file(const std::string& path) { merge_text(read_file(path), "file:" + path); }

std::string env_name(const std::string& key) {
  std::string out(kEnvPrefix);
  for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

void RunConfig::merge_env(const std::function<const char*(const char*)>& getenv_fn) {
  for (const auto& k : keys()) {
    const std::string name = env_name(k.name);
    if (const char* v = getenv_fn(name.c_str())) set(k.name, v, "env:" + name);
  }
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key + ": not an integer: '" + s + "'");
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  const long long v = get_int(key);
  if (v < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(v);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError(key + ": not a number: '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": not a number: '" + s + "'");
  }
}

std::uint64_t RunConfig::seed() const {
  const std::string& s = get("seed");
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("seed: not an unsigned integer: '" + s + "'");
  return v;
}

RolloutConfig RunConfig::rollout() const {
  RolloutConfig c;
  c.max_turns = get_size("max_turns");
  c.max_retrievals = get_size("max_retrievals");
  c.rt_max = get_size("rt_max");
  c.k_docs = get_size("k_docs");
  c.max_obs_chars = get_size("max_obs_chars");
  c.group_size = get_size("group_size");
  c.max_new_tokens = get_size("max_new_tokens");
  c.temperature = get_double("temperature");
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RewardAblation RunConfig::reward_ablation() const {
  const std::string v = to_lower(get("reward_ablation"));
  if (v == "none") return RewardAblation::None;
  if (v == "no_kb") return RewardAblation::NoKb;
  if (v == "no_kb_minus") return RewardAblation::NoKbMinus;
  throw ConfigError("reward_ablation: expected none | no_kb | no_kb_minus, got '" + v + "'");
}

RewardConfig RunConfig::reward() const {
  RewardConfig c;
  c.r_kb_plus = get_double("r_kb_plus");
  c.r_kb_minus = get_double("r_kb_minus");
  c.rt_max = get_size("rt_max");
  switch (reward_ablation()) {
    case RewardAblation::None:
      try {
        c.validate();
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      break;
    case RewardAblation::NoKb:
      c.r_kb_plus = 0.0;
      c.r_kb_minus = 0.0;
      break;
    case RewardAblation::NoKbMinus:
      c.r_kb_minus = 0.0;
      break;
  }
  return c;
}

OptimConfig RunConfig::optim() const {
  OptimConfig c;
  c.clip_eps = get_double("clip_eps");
  c.kl_coeff = get_double("kl_coeff");
  c.learning_rate = get_double("learning_rate");
  c.steps = get_size("steps");
  c.batch_tasks = get_size("batch_tasks");
  c.updates_per_batch = get_size("updates_per_batch");
  const std::string ref = to_lower(get("kl_reference"));
  if (ref == "snapshot") {
    c.kl_reference = KlReference::IterationSnapshot;
  } else if (ref == "initial") {
    c.kl_reference = KlReference::InitialPolicy;
  } else {
    throw ConfigError("kl_reference: expected snapshot | initial, got '" + ref + "'");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ProbeConfig RunConfig::probe() const {
  ProbeConfig c;
  c.n_samples = get_size("n_samples");
  if (c.n_samples < 1) throw ConfigError("n_samples must be >= 1");
  c.temperature = get_double("probe_temperature");
  const std::string& ex = get("exemplars");
  if (!ex.empty()) c.exemplars = load_exemplars(ex);
  return c;
}

WorldOptions RunConfig::world() const {
  WorldOptions w;
  w.n_entities = get_size("n_entities");
  w.internal_fraction = get_double("internal_fraction");
  w.two_hop_per_entity = get_size("two_hop_per_entity");
  w.n_drill_entities = get_size("n_drill_entities");
  return w;
}

SeedConfig RunConfig::seeding() const {
  SeedConfig s;
  s.dim = get_size("toy_dim");
  s.drill_rounds = get_size("drill_rounds");
  s.fit.epochs = get_size("seed_epochs");
  s.fit.learning_rate = get_double("seed_lr");
  s.unknown_query_weight = get_double("unknown_query_weight");
  s.internal_noise = get_double("internal_noise");
  if (s.unknown_query_weight < 0.0) throw ConfigError("unknown_query_weight must be >= 0");
  if (s.internal_noise < 0.0 || s.internal_noise >= 1.0) throw ConfigError("internal_noise must be in [0, 1)");
  s.fit.seed = seed();
  return s;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.rollout = rollout();
  t.reward = reward();
  t.optim = optim();
  t.seed = seed();
  return t;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "  # " + origin_.at(k) + "\n";
  return out;
}

}  // namespace ikea
