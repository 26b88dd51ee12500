#pragma once

// Flat key=value run configuration. Precedence, later wins: built-in
// defaults, config file, IKEA_<KEY> environment variables, command-line flags.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ikea/dataset.hpp"
#include "ikea/grpo.hpp"
#include "ikea/reward.hpp"
#include "ikea/rollout.hpp"
#include "ikea/seeding.hpp"
#include "ikea/trainer.hpp"
#include "ikea/world.hpp"

namespace ikea {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

inline constexpr std::string_view kEnvPrefix = "IKEA_";

enum class RewardAblation { None, NoKb, NoKbMinus };

class RunConfig {
 public:
  RunConfig();

  static const std::vector<ConfigKey>& keys();
  static bool is_key(const std::string& name);

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value, const std::string& origin);
  const std::string& get(const std::string& key) const;
  const std::string& origin(const std::string& key) const { return origin_.at(key); }

  /// Lines of "key = value"; '#' starts a comment.
  void merge_file(const std::string& path);
  void merge_text(const std::string& text, const std::string& origin);
  /// Reads IKEA_<UPPERCASE KEY> through `getenv`.
  void merge_env(const std::function<const char*(const char*)>& getenv_fn);

  std::string get_string(const std::string& key) const { return get(key); }
  long long get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t seed() const;

  RolloutConfig rollout() const;
  /// Ablations bypass RewardConfig::validate on purpose.
  RewardConfig reward() const;
  RewardAblation reward_ablation() const;
  OptimConfig optim() const;
  ProbeConfig probe() const;
  WorldOptions world() const;
  SeedConfig seeding() const;
  TrainConfig train() const;

  /// Every key with its resolved value and origin, sorted by key.
  std::string resolved() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origin_;
};

std::string env_name(const std::string& key);

}  // namespace ikea
