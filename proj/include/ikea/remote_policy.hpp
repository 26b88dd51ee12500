#pragma once

#include <chrono>
#include <string>

#include "ikea/policy.hpp"

namespace ikea {

class RemoteTimeout : public RemoteUnavailable {
 public:
  using RemoteUnavailable::RemoteUnavailable;
};

class RemoteHttpError : public Error {
 public:
  RemoteHttpError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct RemoteConfig {
  std::chrono::milliseconds timeout{30000};
  std::size_t retries = 2;  // extra attempts after the first
};

/// Client for an inference server speaking
///   POST /generate {prompt, stop, max_tokens, temperature, seed}
///   -> {text, tokens, logprobs | null}.
/// Logprobs are kept only when `tokens` are strings concatenating to `text`,
/// so they align with the harness token stream; otherwise they are dropped.
class RemotePolicy final : public Policy {
 public:
  /// `endpoint` is "http://host:port" with an optional path prefix.
  explicit RemotePolicy(std::string endpoint, RemoteConfig cfg = {});

  GenerationResponse generate(const GenerationRequest& req) const override;
  std::string describe() const override { return "remote:" + endpoint_; }

 private:
  std::string endpoint_;
  std::string base_;
  std::string path_prefix_;
  RemoteConfig cfg_;
};

GenerationResponse remote_generate(const std::string& endpoint, const GenerationRequest& req,
                                   const RemoteConfig& cfg = {});

/// Validates a /generate response body; throws ContractViolation.
GenerationResponse parse_generate_response(const std::string& body);

}  // namespace ikea
