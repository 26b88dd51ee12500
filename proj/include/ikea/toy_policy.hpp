#pragma once

// Linear-softmax policy over hashed features of the state text. Small enough
// to train in seconds and differentiable in closed form:
//   logits = Theta * phi(state),  log pi(token | state) = log softmax(logits)[token].

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ikea/policy.hpp"

namespace ikea {

class UnknownToken : public Error {
 public:
  explicit UnknownToken(const std::string& tok) : Error("token not in vocabulary: '" + tok + "'") {}
};

struct SparseFeatures {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
  std::size_t size() const { return index.size(); }
};

/// Keys of the state text: uni/bi/trigrams of the question's content words
/// (split by whether anything was retrieved yet), those words again at the
/// search-or-answer decision point, the last one and two transcript tokens,
/// the currently open agent tag, the observation count, and the terms and
/// statement object of the first block of the latest observation. Each key is
/// hashed into `dim` buckets by multiplicative hashing.
SparseFeatures state_features(std::string_view state, std::size_t dim);
std::vector<std::string> state_feature_keys(std::string_view state);
std::uint32_t hash_feature(std::string_view key, std::size_t dim);

inline constexpr std::string_view kEndSymbol = "\n";

class ToyPolicy final : public Policy {
 public:
  /// `dim` must be a power of two.
  ToyPolicy(std::vector<std::string> vocabulary, std::size_t dim);

  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t num_parameters() const { return theta_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  std::span<double> parameters() { return theta_; }
  std::span<const double> parameters() const { return theta_; }

  /// Emitted text for a vocabulary symbol: a leading space, except the end symbol.
  const std::string& token_text(std::size_t id) const { return texts_[id]; }
  /// Inverse of `token_text`; throws UnknownToken.
  std::size_t token_id(std::string_view token_text) const;
  std::size_t symbol_id(std::string_view symbol) const;

  SparseFeatures features(std::string_view state) const { return state_features(state, dim_); }

  /// Log-probabilities of every vocabulary entry.
  std::vector<double> log_probs(const SparseFeatures& f) const;
  std::vector<double> log_probs(std::string_view state) const { return log_probs(features(state)); }

  struct LogprobGrad {
    double logprob = 0.0;
    std::vector<double> grad;  // dense, parameter layout
  };
  LogprobGrad logprob_and_grad(std::string_view state, std::string_view token_text) const;

  /// grad += scale * d log pi(token | f) / d theta, given log_probs(f).
  void add_logprob_grad(const SparseFeatures& f, std::span<const double> logp, std::size_t token,
                        double scale, std::span<double> grad) const;

  GenerationResponse generate(const GenerationRequest& req) const override;
  std::string describe() const override { return "toy"; }

  void save(const std::string& path) const;
  static ToyPolicy load(const std::string& path);

 private:
  std::vector<std::string> vocab_;
  std::vector<std::string> texts_;
  std::unordered_map<std::string, std::size_t> by_text_;
  std::size_t dim_;
  std::vector<double> theta_;  // row-major [vocab][dim]
};

/// One supervised example: a state and the tokens that should follow it.
struct Demonstration {
  std::string state;
  std::vector<std::string> target;  // token texts
  double weight = 1.0;
};

struct SupervisedConfig {
  std::size_t epochs = 4;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

/// Plain SGD on the weighted mean token negative log-likelihood, one
/// demonstration per update, in a seeded order each epoch, with the learning
/// rate decayed linearly to zero over the epochs. Each token step is
/// divided by the number of active features so the logit change per step is
/// bounded by the learning rate. Returns the final epoch's mean NLL.
double supervised_fit(ToyPolicy& policy, const std::vector<Demonstration>& demos,
                      const SupervisedConfig& cfg);

}  // namespace ikea
