#include "ikea/remote_policy.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

namespace ikea {

using nlohmann::json;

RemotePolicy::RemotePolicy(std::string endpoint, RemoteConfig cfg)
    : endpoint_(std::move(endpoint)), cfg_(cfg) {
  const auto scheme = endpoint_.find("://");
  const auto host_begin = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = endpoint_.find('/', host_begin);
  base_ = endpoint_.substr(0, slash);
  if (slash != std::string::npos) path_prefix_ = endpoint_.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

GenerationResponse parse_generate_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ContractViolation(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ContractViolation("response is not a JSON object");
  if (!j.contains("text") || !j["text"].is_string()) throw ContractViolation("missing string field 'text'");
  if (!j.contains("tokens") || !j["tokens"].is_array()) throw ContractViolation("missing array field 'tokens'");

  GenerationResponse resp;
  resp.text = j["text"].get<std::string>();
  bool string_tokens = true;
  std::vector<std::string> tokens;
  for (const auto& t : j["tokens"]) {
    if (t.is_string()) {
      tokens.push_back(t.get<std::string>());
    } else if (t.is_number_integer()) {
      string_tokens = false;
    } else {
      throw ContractViolation("tokens must be strings or integers");
    }
  }

  std::optional<std::vector<double>> logprobs;
  if (j.contains("logprobs") && !j["logprobs"].is_null()) {
    if (!j["logprobs"].is_array()) throw ContractViolation("logprobs must be an array or null");
    std::vector<double> lp;
    for (const auto& x : j["logprobs"]) {
      if (!x.is_number()) throw ContractViolation("logprobs must be numbers");
      const double v = x.get<double>();
      if (!std::isfinite(v) || v > 0.0) throw ContractViolation("logprobs must be finite and <= 0");
      lp.push_back(v);
    }
    if (lp.size() != j["tokens"].size()) throw ContractViolation("logprobs and tokens differ in length");
    logprobs = std::move(lp);
  }

  std::string joined;
  for (const auto& t : tokens) joined += t;
  if (string_tokens && joined == resp.text) {
    resp.tokens = std::move(tokens);
    resp.logprobs = std::move(logprobs);
  } else {
    resp.tokens = tokenize(resp.text);
  }
  return resp;
}

GenerationResponse RemotePolicy::generate(const GenerationRequest& req) const {
  httplib::Client client(base_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const json payload = {{"prompt", req.prompt},       {"stop", req.stop_sequences},
                        {"max_tokens", req.max_tokens}, {"temperature", req.temperature},
                        {"seed", req.seed}};
  const std::string body = payload.dump();

  std::string last_error;
  bool timed_out = false;
  for (std::size_t attempt = 0; attempt <= cfg_.retries; ++attempt) {
    auto res = client.Post(path_prefix_ + "/generate", body, "application/json");
    if (!res) {
      timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout;
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw RemoteHttpError(res->status, "remote returned HTTP " + std::to_string(res->status));
    }
    return parse_generate_response(res->body);
  }
  const std::string msg = "remote unavailable after " + std::to_string(cfg_.retries + 1) +
                          " attempts: " + last_error;
  if (timed_out) throw RemoteTimeout(msg);
  throw RemoteUnavailable(msg);
}

GenerationResponse remote_generate(const std::string& endpoint, const GenerationRequest& req,
                                   const RemoteConfig& cfg) {
  return RemotePolicy(endpoint, cfg).generate(req);
}

}  // namespace ikea
