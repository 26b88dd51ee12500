#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "doctest.h"
#include "ikea/remote_policy.hpp"
#include "ikea/toy_policy.hpp"
#include "support.hpp"

using namespace ikea;
using namespace ikea::testing;

namespace {

std::vector<std::string> small_vocab() {
  return {"<think>", "</think>", "<search>", "</search>", "<answer>", "</answer>",
          "paris",   "rome",     "capital", "\n"};
}

ToyPolicy random_policy(std::uint64_t seed, std::size_t dim = 64, double scale = 0.3) {
  ToyPolicy p(small_vocab(), dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& x : p.parameters()) x = n(rng);
  return p;
}

// Test server running a handler on an ephemeral port.
class MockServer {
 public:
  explicit MockServer(httplib::Server::Handler h) {
    server_.Post("/generate", std::move(h));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("scripted policy echoes its turn") {
  ScriptedPolicy p(std::vector<std::string>{"<think>a</think><answer>b</answer>"});
  GenerationRequest req;
  req.prompt = "Question: q\n";
  CHECK(p.generate(req).text == "<think>a</think><answer>b</answer>");
}

TEST_CASE("scripted policy turn follows the observation count") {
  ScriptedPolicy p(std::vector<std::string>{"<think>a</think><search>s</search>", "<think>b</think><answer>x</answer>"});
  GenerationRequest req;
  req.prompt = "Question: q\n<think>a</think><search>s</search>\n<context>c</context>";
  CHECK(p.generate(req).text == "<think>b</think><answer>x</answer>");
}

TEST_CASE("scripted policy selects per question") {
  ScriptedPolicy p({{"Who?", {"<think>1</think><answer>one</answer>"}}},
                   {"<think>d</think><answer>dflt</answer>"});
  GenerationRequest req;
  req.prompt = "Question: Who?\n";
  CHECK(p.generate(req).text.find("one") != std::string::npos);
  req.prompt = "Question: Other\n";
  CHECK(p.generate(req).text.find("dflt") != std::string::npos);
}

TEST_CASE("stop_position cuts after the earliest stop") {
  CHECK(stop_position("a</search>b</answer>", {"</answer>", "</search>"}) == 10);
  CHECK_FALSE(stop_position("abc", {"</answer>"}).has_value());
}

TEST_CASE("toy policy greedy output is stable") {
  const auto p = random_policy(1);
  GenerationRequest req{"Question: what is the capital\n", {"</answer>"}, 12, 0.0, 5};
  const auto first = p.generate(req);
  for (int i = 0; i < 100; ++i) {
    req.seed = static_cast<std::uint64_t>(i);
    CHECK(p.generate(req).text == first.text);
  }
}

TEST_CASE("toy policy sampling is seeded") {
  const auto p = random_policy(2);
  GenerationRequest req{"Question: what is the capital\n", {"</answer>"}, 12, 1.0, 77};
  const auto a = p.generate(req);
  for (int i = 0; i < 10; ++i) CHECK(p.generate(req).text == a.text);
  REQUIRE(a.logprobs.has_value());
  CHECK(a.logprobs->size() == a.tokens.size());
  std::string joined;
  for (const auto& t : a.tokens) joined += t;
  CHECK(joined == a.text);
}

TEST_CASE("toy policy logprobs match log_probs of each state") {
  const auto p = random_policy(3);
  GenerationRequest req{"Question: capital\n", {"</answer>"}, 8, 1.0, 9};
  const auto r = p.generate(req);
  std::string state = req.prompt;
  for (std::size_t i = 0; i < r.tokens.size(); ++i) {
    const auto lp = p.log_probs(state);
    CHECK((*r.logprobs)[i] == doctest::Approx(lp[p.token_id(r.tokens[i])]).epsilon(1e-12));
    state += r.tokens[i];
  }
}

TEST_CASE("uniform parameters give -ln V") {
  ToyPolicy p(small_vocab(), 32);
  for (const auto& sym : small_vocab()) {
    const auto id = p.symbol_id(sym);
    const auto r = p.logprob_and_grad("any state", p.token_text(id));
    CHECK(r.logprob == doctest::Approx(-std::log(static_cast<double>(small_vocab().size()))).epsilon(1e-14));
  }
}

TEST_CASE("logprob gradient matches central differences") {
  auto p = random_policy(4, 32);
  const std::string state = "Question: what is the capital of italy\n<think>";
  const std::string tok = p.token_text(p.symbol_id("rome"));
  const auto r = p.logprob_and_grad(state, tok);
  const auto f = p.features(state);
  auto params = p.parameters();
  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t row = 0; row < p.vocab_size(); ++row) {
    for (auto col : f.index) {
      const std::size_t i = row * p.dim() + col;
      const double keep = params[i];
      params[i] = keep + h;
      const double up = p.log_probs(state)[p.token_id(tok)];
      params[i] = keep - h;
      const double down = p.log_probs(state)[p.token_id(tok)];
      params[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max(std::abs(fd), std::abs(r.grad[i]));
      if (denom < 1e-8) continue;
      CHECK(std::abs(fd - r.grad[i]) / denom <= 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("toy policy save and load round-trip") {
  TempDir dir("toy");
  const auto p = random_policy(6);
  p.save(dir.file("p.bin"));
  const auto q = ToyPolicy::load(dir.file("p.bin"));
  CHECK(q.vocabulary() == p.vocabulary());
  CHECK(q.dim() == p.dim());
  const auto a = p.parameters();
  const auto b = q.parameters();
  CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

TEST_CASE("toy policy rejects non power of two dims and unknown tokens") {
  CHECK_THROWS(ToyPolicy(small_vocab(), 100));
  ToyPolicy p(small_vocab(), 16);
  CHECK_THROWS_AS(p.token_id(" berlin"), UnknownToken);
}

TEST_CASE("remote policy echoes a mock server") {
  std::atomic<int> calls{0};
  MockServer srv([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto j = nlohmann::json::parse(req.body);
    CHECK(j["prompt"] == "Question: q\n");
    CHECK(j["seed"] == 12);
    res.set_content(R"({"text":"<think>a</think><answer>b</answer>","tokens":["<think>","a","</think>","<answer>","b","</answer>"],"logprobs":[-0.1,-0.2,-0.3,-0.4,-0.5,-0.6]})",
                    "application/json");
  });
  RemotePolicy p(srv.url());
  GenerationRequest req{"Question: q\n", {"</answer>"}, 16, 1.0, 12};
  const auto r = p.generate(req);
  CHECK(r.text == "<think>a</think><answer>b</answer>");
  REQUIRE(r.logprobs.has_value());
  CHECK(r.logprobs->size() == 6);
  CHECK(calls == 1);
}

TEST_CASE("remote policy drops logprobs for foreign tokens") {
  MockServer srv([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text":"<think>a</think>","tokens":[5,6,7],"logprobs":[-1,-1,-1]})", "application/json");
  });
  const auto r = remote_generate(srv.url(), GenerationRequest{"Question: q\n", {}, 8, 1.0, 0});
  CHECK_FALSE(r.logprobs.has_value());
  CHECK(r.tokens == tokenize("<think>a</think>"));
}

TEST_CASE("remote policy schema violations") {
  MockServer srv([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"tokens":[]})", "application/json");
  });
  CHECK_THROWS_AS(remote_generate(srv.url(), GenerationRequest{}), ContractViolation);
  CHECK_THROWS_AS(parse_generate_response("not json"), ContractViolation);
  CHECK_THROWS_AS(parse_generate_response(R"({"text":"a","tokens":["a"],"logprobs":[0.5]})"),
                  ContractViolation);
}

TEST_CASE("remote policy times out after retries") {
  std::atomic<int> calls{0};
  MockServer srv([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(R"({"text":"","tokens":[]})", "application/json");
  });
  RemoteConfig cfg;
  cfg.timeout = std::chrono::milliseconds(100);
  cfg.retries = 2;
  CHECK_THROWS_AS(remote_generate(srv.url(), GenerationRequest{}, cfg), RemoteUnavailable);
  CHECK(calls == 3);
}

TEST_CASE("remote policy with nothing listening") {
  RemoteConfig cfg;
  cfg.timeout = std::chrono::milliseconds(200);
  cfg.retries = 1;
  CHECK_THROWS_AS(remote_generate("http://127.0.0.1:1", GenerationRequest{}, cfg), RemoteUnavailable);
}

TEST_CASE("remote policy surfaces HTTP errors") {
  httplib::Server::Handler h = [](const httplib::Request&, httplib::Response& res) { res.status = 503; };
  MockServer srv(h);
  try {
    remote_generate(srv.url(), GenerationRequest{});
    FAIL("expected an error");
  } catch (const RemoteHttpError& e) {
    CHECK(e.status() == 503);
  }
}
