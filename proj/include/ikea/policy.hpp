#pragma once

// Generation interface shared by scripted, toy and remote policies.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ikea/text.hpp"

namespace ikea {

struct GenerationRequest {
  std::string prompt;
  std::vector<std::string> stop_sequences;
  std::size_t max_tokens = 64;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct GenerationResponse {
  std::string text;  // includes the stop sequence that fired
  std::vector<std::string> tokens;
  std::optional<std::vector<double>> logprobs;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class RemoteUnavailable : public Error {
 public:
  using Error::Error;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual GenerationResponse generate(const GenerationRequest& req) const = 0;
  virtual std::string describe() const = 0;
};

using PolicyHandle = std::shared_ptr<const Policy>;

/// Cuts `text` just after the earliest stop sequence; nullopt when none occurs.
std::optional<std::size_t> stop_position(std::string_view text,
                                         const std::vector<std::string>& stops);

/// Question line of a prompt (text after the last "Question:" marker).
std::string_view prompt_question(std::string_view prompt);
/// Text following the question line, i.e. the transcript so far.
std::string_view prompt_transcript(std::string_view prompt);

/// Replays fixed turns. The turn index is the number of observations already
/// in the transcript, so the policy is stateless and every rollout of the
/// same question sees the same script. Past the end, the last turn repeats.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<std::string> default_turns);
  ScriptedPolicy(std::map<std::string, std::vector<std::string>> per_question,
                 std::vector<std::string> default_turns = {});

  /// `.jsonl`: lines of {"question": ..., "turns": [...]}, question "*" is the
  /// fallback. Anything else: plain text, turns separated by "---" lines.
  static std::shared_ptr<ScriptedPolicy> load(const std::string& path);

  GenerationResponse generate(const GenerationRequest& req) const override;
  std::string describe() const override { return "scripted"; }

 private:
  std::map<std::string, std::vector<std::string>> per_question_;
  std::vector<std::string> default_turns_;
};

}  // namespace ikea
