#include "ikea/toy_policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <unordered_set>

namespace ikea {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr char kMagic[8] = {'I', 'K', 'E', 'A', 'T', 'O', 'Y', '1'};

// Uniform double in [0, 1) with 53 random bits; identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void add_ngrams(std::vector<std::string>& keys, const std::string& prefix,
                const std::vector<std::string>& terms, std::size_t max_n) {
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t i = 0; i + n <= terms.size(); ++i) {
      std::string key = prefix + std::to_string(n) + ":" + terms[i];
      for (std::size_t j = 1; j < n; ++j) key += "_" + terms[i + j];
      keys.push_back(std::move(key));
    }
  }
}

// Function words of the question templates carry no information about which
// fact is asked for.
bool is_stopword(const std::string& t) {
  static const std::unordered_set<std::string> kStop = {"a",   "an",    "the", "of",    "is",  "are",
                                                        "was", "what",  "who", "which", "in",  "on",
                                                        "to",  "for",   "and", "does",  "did", "do"};
  return kStop.count(t) > 0;
}

std::vector<std::string> content_terms(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : index_terms(text)) {
    if (!is_stopword(t)) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::uint32_t hash_feature(std::string_view key, std::size_t dim) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : key) {
    h ^= c;
    h *= kFnvPrime;
  }
  const int bits = std::countr_zero(dim);
  if (bits == 0) return 0;
  return static_cast<std::uint32_t>((h * kGolden) >> (64 - bits));
}

std::vector<std::string> state_feature_keys(std::string_view state) {
  std::vector<std::string> keys;
  const std::string_view transcript = prompt_transcript(state);
  const auto tokens = tokenize(transcript);
  std::string last = "^";
  std::string prev = "^";
  std::size_t n_ctx = 0;
  std::size_t last_ctx_open = tokens.size();
  std::size_t last_ctx_close = tokens.size();
  std::size_t offset = 0;
  std::size_t ctx_body_begin = 0;
  std::size_t ctx_body_end = 0;
  std::string open = "-";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto core = token_core(tokens[i]);
    offset += tokens[i].size();
    if (core.empty()) continue;
    prev = last;
    last = to_lower(core);
    if (core == kThinkOpen || core == kSearchOpen || core == kAnswerOpen) {
      open = last;
    } else if (core == kThinkClose || core == kSearchClose || core == kAnswerClose) {
      open = "-";
    }
    if (core == kContextOpen) {
      ++n_ctx;
      last_ctx_open = i;
      last_ctx_close = tokens.size();
      ctx_body_begin = offset;
    } else if (core == kContextClose && last_ctx_open < tokens.size()) {
      last_ctx_close = i;
      ctx_body_end = offset - core.size();
    }
  }
  const std::string nc = std::to_string(std::min<std::size_t>(n_ctx, 3));
  // Question features are split by whether anything was retrieved yet, so the
  // first-turn decision and the post-observation turns share few weights.
  const std::string region = n_ctx > 0 ? "r" : "";
  keys.push_back("b" + region);
  const auto q_terms = content_terms(prompt_question(state));
  add_ngrams(keys, "q" + region, q_terms, 3);
  // Question words conjoined with the search-or-answer decision point, so that
  // decision can depend on the specific question without moving other positions.
  if (last == kThinkClose) add_ngrams(keys, "x" + nc + "|", q_terms, 2);
  keys.push_back("l1:" + last);
  keys.push_back("l2:" + prev + "|" + last);
  keys.push_back("nc:" + nc);
  keys.push_back("l1n:" + last + "|" + nc);
  keys.push_back("o:" + open);

  if (last_ctx_close < tokens.size()) {
    std::string_view body = transcript.substr(ctx_body_begin, ctx_body_end - ctx_body_begin);
    const auto second = body.find("Title:", 1);
    if (second != std::string_view::npos) body = body.substr(0, second);
    std::unordered_set<std::string> seen;
    for (const auto& t : index_terms(body)) {
      if (seen.insert(t).second) keys.push_back("c1:" + t);
    }
    // Object of the block's first statement: the word after " is ".
    const auto is = body.find(" is ");
    if (is != std::string_view::npos) {
      const auto obj = index_terms(body.substr(is + 4));
      if (!obj.empty()) keys.push_back("cv:" + obj.front());
    }
  }
  return keys;
}

SparseFeatures state_features(std::string_view state, std::size_t dim) {
  SparseFeatures f;
  for (const auto& key : state_feature_keys(state)) {
    f.index.push_back(hash_feature(key, dim));
    f.value.push_back(1.0);
  }
  return f;
}

ToyPolicy::ToyPolicy(std::vector<std::string> vocabulary, std::size_t dim)
    : vocab_(std::move(vocabulary)), dim_(dim) {
  if (dim_ == 0 || !std::has_single_bit(dim_)) throw Error("toy policy dim must be a power of two");
  if (vocab_.empty()) throw Error("toy policy vocabulary is empty");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    texts_.push_back(vocab_[i] == kEndSymbol ? vocab_[i] : " " + vocab_[i]);
    if (!by_text_.emplace(texts_.back(), i).second) throw Error("duplicate vocabulary symbol: " + vocab_[i]);
  }
  theta_.assign(vocab_.size() * dim_, 0.0);
}

std::size_t ToyPolicy::token_id(std::string_view token_text) const {
  auto it = by_text_.find(std::string(token_text));
  if (it == by_text_.end()) throw UnknownToken(std::string(token_text));
  return it->second;
}

std::size_t ToyPolicy::symbol_id(std::string_view symbol) const {
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i] == symbol) return i;
  }
  throw UnknownToken(std::string(symbol));
}

std::vector<double> ToyPolicy::log_probs(const SparseFeatures& f) const {
  const std::size_t v_n = vocab_.size();
  std::vector<double> logits(v_n, 0.0);
  for (std::size_t v = 0; v < v_n; ++v) {
    const double* row = theta_.data() + v * dim_;
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += row[f.index[i]] * f.value[i];
    logits[v] = acc;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  for (double& l : logits) l -= lse;
  return logits;
}

void ToyPolicy::add_logprob_grad(const SparseFeatures& f, std::span<const double> logp,
                                 std::size_t token, double scale, std::span<double> grad) const {
  for (std::size_t v = 0; v < vocab_.size(); ++v) {
    const double coeff = scale * ((v == token ? 1.0 : 0.0) - std::exp(logp[v]));
    double* row = grad.data() + v * dim_;
    for (std::size_t i = 0; i < f.size(); ++i) row[f.index[i]] += coeff * f.value[i];
  }
}

ToyPolicy::LogprobGrad ToyPolicy::logprob_and_grad(std::string_view state,
                                                   std::string_view token_text) const {
  const std::size_t tok = token_id(token_text);
  const auto f = features(state);
  const auto logp = log_probs(f);
  LogprobGrad out;
  out.logprob = logp[tok];
  out.grad.assign(theta_.size(), 0.0);
  add_logprob_grad(f, logp, tok, 1.0, out.grad);
  return out;
}

GenerationResponse ToyPolicy::generate(const GenerationRequest& req) const {
  std::mt19937_64 rng(req.seed);
  std::string state = req.prompt;
  GenerationResponse resp;
  std::vector<double> lps;
  std::vector<double> weights(vocab_.size());
  for (std::size_t step = 0; step < req.max_tokens; ++step) {
    const auto logp = log_probs(features(state));
    std::size_t pick = 0;
    if (req.temperature <= 0.0) {
      pick = static_cast<std::size_t>(std::max_element(logp.begin(), logp.end()) - logp.begin());
    } else {
      const double mx = *std::max_element(logp.begin(), logp.end());
      double total = 0.0;
      for (std::size_t v = 0; v < logp.size(); ++v) {
        weights[v] = std::exp((logp[v] - mx) / req.temperature);
        total += weights[v];
      }
      double u = uniform01(rng) * total;
      pick = logp.size() - 1;
      for (std::size_t v = 0; v < logp.size(); ++v) {
        u -= weights[v];
        if (u < 0.0) {
          pick = v;
          break;
        }
      }
    }
    const std::string& piece = texts_[pick];
    resp.text += piece;
    resp.tokens.push_back(piece);
    lps.push_back(logp[pick]);
    state += piece;
    if (stop_position(resp.text, req.stop_sequences)) break;
  }
  resp.logprobs = std::move(lps);
  return resp;
}

void ToyPolicy::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write toy policy: " + path);
  auto put_u64 = [&out](std::uint64_t x) { out.write(reinterpret_cast<const char*>(&x), sizeof x); };
  out.write(kMagic, sizeof kMagic);
  put_u64(vocab_.size());
  put_u64(dim_);
  for (const auto& s : vocab_) {
    put_u64(s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  out.write(reinterpret_cast<const char*>(theta_.data()),
            static_cast<std::streamsize>(theta_.size() * sizeof(double)));
}

ToyPolicy ToyPolicy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read toy policy: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error("not a toy policy file: " + path);
  auto get_u64 = [&in]() {
    std::uint64_t x = 0;
    in.read(reinterpret_cast<char*>(&x), sizeof x);
    return x;
  };
  const auto v_n = get_u64();
  const auto dim = get_u64();
  std::vector<std::string> vocab;
  for (std::uint64_t i = 0; i < v_n; ++i) {
    std::string s(get_u64(), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    vocab.push_back(std::move(s));
  }
  ToyPolicy p(std::move(vocab), dim);
  in.read(reinterpret_cast<char*>(p.theta_.data()),
          static_cast<std::streamsize>(p.theta_.size() * sizeof(double)));
  if (!in) throw Error("truncated toy policy file: " + path);
  return p;
}

double supervised_fit(ToyPolicy& policy, const std::vector<Demonstration>& demos,
                      const SupervisedConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(demos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double mean_nll = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    // Linear decay to zero so the fit does not depend on the last few examples.
    const double epoch_lr = cfg.learning_rate * static_cast<double>(cfg.epochs - epoch) /
                            static_cast<double>(cfg.epochs);
    double nll = 0.0;
    std::size_t count = 0;
    for (std::size_t idx : order) {
      const auto& demo = demos[idx];
      std::string state = demo.state;
      const double step = demo.weight * epoch_lr /
                          static_cast<double>(std::max<std::size_t>(1, demo.target.size()));
      for (const auto& tok : demo.target) {
        const std::size_t id = policy.token_id(tok);
        const auto f = policy.features(state);
        const double scale = step / static_cast<double>(std::max<std::size_t>(1, f.size()));
        const auto logp = policy.log_probs(f);
        nll -= logp[id];
        ++count;
        policy.add_logprob_grad(f, logp, id, scale, policy.parameters());
        state += tok;
      }
    }
    mean_nll = count ? nll / static_cast<double>(count) : 0.0;
  }
  return mean_nll;
}

}  // namespace ikea
