#include "ikea/rollout.hpp"

#include <exception>
#include <fstream>
#include <sstream>

namespace ikea {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompt template: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return PromptTemplate(ss.str());
}

std::string PromptTemplate::default_path() { return std::string(IKEA_ASSET_DIR) + "/prompt_template.txt"; }

PromptTemplate PromptTemplate::load_default() { return load(default_path()); }

std::string PromptTemplate::render(std::string_view question, std::size_t max_searches) const {
  std::string out = text_;
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
  replace_all(out, "{max_searches}", std::to_string(max_searches));
  replace_all(out, "{question}", question);
  out.push_back('\n');
  return out;
}

void RolloutConfig::validate() const {
  if (max_turns < 1) throw Error("max_turns must be >= 1");
  if (group_size < 2) throw Error("group_size must be >= 2");
  if (rt_max < 1) throw Error("rt_max must be >= 1");
  if (k_docs < 1) throw Error("k_docs must be >= 1");
}

RetrievalResult Environment::search(std::string_view query, std::size_t k) const {
  calls_.fetch_add(1);
  return retrieve(*index_, query, k);
}

std::size_t Trajectory::action_tokens() const {
  std::size_t n = 0;
  for (auto m : loss_mask) n += m;
  return n;
}

std::uint64_t turn_seed(std::uint64_t seed, std::size_t turn) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(turn) + 1));
}

Trajectory run_rollout(const Policy& policy, const Environment& env, const TaskInstance& task,
                       const RolloutConfig& cfg, std::uint64_t seed) {
  Trajectory tr;
  tr.task = task;
  tr.seed = seed;
  tr.prompt = env.prompt().render(task.question, cfg.max_retrievals);

  auto& parsed = tr.parsed;
  std::string transcript;
  std::vector<double> logprobs;
  bool have_logprobs = true;
  parsed.terminal = Terminal::Truncated;

  for (std::size_t turn = 0; turn < cfg.max_turns; ++turn) {
    GenerationRequest req{tr.prompt + transcript, kRolloutStops, cfg.max_new_tokens, cfg.temperature,
                          turn_seed(seed, turn)};
    const GenerationResponse resp = policy.generate(req);
    ActionParse turn_parse = parse_action(resp.text);

    std::vector<Segment> segs;
    if (turn_parse.ok()) {
      segs = std::move(turn_parse.segments);
    } else {
      segs.push_back(make_segment(SegmentKind::Raw, resp.text));
    }

    std::vector<std::string> turn_tokens;
    for (const auto& s : segs) {
      for (auto& t : tokenize(s.text())) turn_tokens.push_back(std::move(t));
    }
    if (have_logprobs && resp.logprobs && turn_tokens == resp.tokens) {
      logprobs.insert(logprobs.end(), resp.logprobs->begin(), resp.logprobs->end());
    } else {
      have_logprobs = false;
    }
    for (auto& s : segs) parsed.segments.push_back(std::move(s));
    transcript += resp.text;

    if (!turn_parse.ok()) {
      parsed.terminal = Terminal::Malformed;
      break;
    }
    const Segment& action = parsed.segments.back();
    if (action.kind == SegmentKind::Answer) {
      parsed.terminal = Terminal::Answered;
      parsed.answer_text = std::string(trim(action.body));
      break;
    }

    const std::string query(trim(action.body));
    std::string body;
    if (query.empty()) {
      body = kNoResults;
    } else if (tr.retrieval_count < cfg.max_retrievals) {
      ++tr.retrieval_count;
      body = observation_body(env.search(query, cfg.k_docs), env.index(), cfg.max_obs_chars);
    } else {
      body = kSearchLimit;
    }
    Segment ctx = make_segment(SegmentKind::Context, std::move(body), "\n");
    const std::string ctx_text = ctx.text();
    if (have_logprobs) logprobs.insert(logprobs.end(), tokenize(ctx_text).size(), 0.0);
    transcript += ctx_text;
    parsed.segments.push_back(std::move(ctx));
  }

  tr.tokens = assign_token_spans(parsed);
  tr.loss_mask = compute_loss_mask(parsed);
  if (have_logprobs && logprobs.size() == tr.tokens.size()) tr.old_logprobs = std::move(logprobs);
  return tr;
}

GroupBatch run_group(const Policy& policy, const Environment& env, const TaskInstance& task,
                     const RolloutConfig& cfg, std::uint64_t seed) {
  if (cfg.group_size < 2) throw Error("group size must be >= 2");
  GroupBatch g;
  g.task = task;
  g.group_id = task.task_id + "@" + std::to_string(seed);
  g.seed = seed;
  for (std::size_t i = 0; i < cfg.group_size; ++i) {
    g.trajectories.push_back(run_rollout(policy, env, task, cfg, seed + i));
  }
  return g;
}

std::vector<GroupBatch> run_groups_serial(const Policy& policy, const Environment& env,
                                          const std::vector<TaskInstance>& tasks,
                                          const RolloutConfig& cfg,
                                          const std::vector<std::uint64_t>& seeds) {
  std::vector<GroupBatch> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) out.push_back(run_group(policy, env, tasks[i], cfg, seeds[i]));
  return out;
}

std::vector<GroupBatch> run_groups(const Policy& policy, const Environment& env,
                                   const std::vector<TaskInstance>& tasks, const RolloutConfig& cfg,
                                   const std::vector<std::uint64_t>& seeds) {
  if (cfg.group_size < 2) throw Error("group size must be >= 2");
  const std::size_t g_n = cfg.group_size;
  std::vector<GroupBatch> out(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    out[i].task = tasks[i];
    out[i].group_id = tasks[i].task_id + "@" + std::to_string(seeds[i]);
    out[i].seed = seeds[i];
    out[i].trajectories.resize(g_n);
  }
  const auto total = static_cast<std::ptrdiff_t>(tasks.size() * g_n);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t flat = 0; flat < total; ++flat) {
    const auto task_i = static_cast<std::size_t>(flat) / g_n;
    const auto member = static_cast<std::size_t>(flat) % g_n;
    try {
      out[task_i].trajectories[member] =
          run_rollout(policy, env, tasks[task_i], cfg, seeds[task_i] + member);
    } catch (...) {
#pragma omp critical(ikea_rollout_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::size_t count_valid_retrievals(const ParsedTrajectory& parsed) {
  std::size_t n = 0;
  const auto& segs = parsed.segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].kind != SegmentKind::Search || is_blank(segs[i].body)) continue;
    if (i + 1 < segs.size() && segs[i + 1].kind == SegmentKind::Context &&
        segs[i + 1].body != kSearchLimit) {
      ++n;
    }
  }
  return n;
}

}  // namespace ikea
