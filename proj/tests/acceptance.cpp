// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Optional arguments select criteria by name (A1 ... A9).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ikea/config.hpp"
#include "ikea/dataset.hpp"
#include "ikea/grpo.hpp"
#include "ikea/trainer.hpp"
#include "protocol_corpus.hpp"
#include "support.hpp"
#include "toy_fixture.hpp"

using namespace ikea;
using namespace ikea::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  double extra_seconds = 0.0;  // shared setup charged to this criterion
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- A1

// Malformed transcripts keep their searches and drop the final think.
std::string transcript(std::size_t searches, const std::string& answer, bool valid) {
  std::string out;
  for (std::size_t i = 0; i < searches; ++i) {
    out += "<think>look it up</think>\n<search>capital of france</search>\n"
           "<context>France: Paris is the capital of France.</context>\n";
  }
  return out + (valid ? "<think>done</think>\n" : "") + "<answer>" + answer + "</answer>";
}

Outcome a1() {
  const RewardConfig cfg;
  const FormatLimits limits{8};
  const std::vector<std::string> golds = {"Paris"};
  std::size_t cases = 0, bad = 0;
  for (bool valid : {true, false}) {
    for (int r_ans : {0, 1}) {
      for (std::size_t rt = 0; rt <= 5; ++rt) {
        const std::string text = transcript(rt, r_ans ? "Paris" : "Lyon", valid);
        Trajectory t;
        t.parsed = parse_transcript(text);
        t.retrieval_count = count_valid_retrievals(t.parsed);
        if (t.retrieval_count != rt) ++bad;
        const double got = total_reward(t, golds, cfg, limits).total;
        // Exact rationals: 1 + (3/5)(3 - m)/3 = (24 - 3m)/15 and 1/20, each
        // rounded once by the division.
        const std::size_t m = std::min<std::size_t>(rt, 3);
        double want;
        if (!valid) want = -1.0;
        else if (r_ans) want = static_cast<double>(24 - 3 * m) / 15.0;
        else want = rt == 0 ? 0.0 : 1.0 / 20.0;
        ++cases;
        if (got != want) ++bad;
      }
    }
  }
  return {bad == 0, fmt("%zu cases, %zu mismatches", cases, bad)};
}

// ---- A2

Outcome a2() {
  std::mt19937_64 rng(2024);
  const std::vector<double> support = {-1.0, 0.0, 0.05, 1.0, 1.2, 1.4, 1.6};
  double worst_mu = 0.0, worst_sd = 0.0, worst_ref = 0.0;
  std::size_t zero_groups = 0, zero_bad = 0;
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 2 + rng() % 15;
    std::vector<double> r(n);
    switch (g % 4) {
      case 0:  // reward support values
        for (auto& x : r) x = support[rng() % support.size()];
        break;
      case 1:  // constant group
        std::fill(r.begin(), r.end(), support[rng() % support.size()]);
        break;
      default: {
        std::normal_distribution<double> d(0.0, std::pow(10.0, static_cast<double>(rng() % 7) - 3.0));
        for (auto& x : r) x = d(rng);
      }
    }
    const auto adv = group_advantages(r).advantages;
    long double mu = 0.0L;
    for (double x : r) mu += x;
    mu /= n;
    long double var = 0.0L;
    for (double x : r) var += (x - mu) * (x - mu);
    var /= n;
    bool constant = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
    if (constant) {
      ++zero_groups;
      if (std::any_of(adv.begin(), adv.end(), [](double a) { return a != 0.0; })) ++zero_bad;
      continue;
    }
    const long double sd = std::sqrt(var);
    long double am = 0.0L, av = 0.0L;
    for (double a : adv) am += a;
    am /= n;
    for (double a : adv) av += (a - am) * (a - am);
    worst_mu = std::max(worst_mu, static_cast<double>(std::fabs(am)));
    worst_sd = std::max(worst_sd, static_cast<double>(std::fabs(std::sqrt(av / n) - 1.0L)));
    for (std::size_t i = 0; i < n; ++i) {
      worst_ref = std::max(worst_ref, static_cast<double>(std::fabs((r[i] - mu) / sd - adv[i])));
    }
  }
  const bool pass = worst_mu < 1e-9 && worst_sd < 1e-9 && worst_ref <= 1e-12 && zero_bad == 0 && zero_groups > 0;
  return {pass, fmt("max|mu| %.2e, max|std-1| %.2e, max|ref diff| %.2e, zero-variance groups %zu (%zu nonzero)",
                    worst_mu, worst_sd, worst_ref, zero_groups, zero_bad)};
}

// ---- A3

Outcome a3() {
  const CorpusIndex index = index_corpus(random_corpus(100, 3));
  const Environment env(index, tiny_prompt());
  RolloutConfig rc;
  rc.max_turns = 8;
  std::mt19937_64 rng(33);
  std::normal_distribution<double> lp(-2.0, 1.0);
  std::uniform_real_distribution<double> wild(-1e6, 1e6);
  std::size_t checked = 0, with_obs = 0, changed = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> turns;
    const std::size_t searches = rng() % 5;
    for (std::size_t s = 0; s < searches; ++s) {
      turns.push_back("<think>" + random_text(rng, 1 + rng() % 4) + "</think>\n<search>" +
                      random_text(rng, 1 + rng() % 3) + "</search>");
    }
    turns.push_back("<think>" + random_text(rng, 2) + "</think>\n<answer>" + random_text(rng, 1) + "</answer>");
    const ScriptedPolicy policy(turns);
    const auto t = run_rollout(policy, env, task("q" + std::to_string(i), "Which word?", {"alpha"}), rc, i);
    const auto& mask = t.loss_mask;
    std::vector<double> nw(mask.size()), old(mask.size()), ref(mask.size());
    for (std::size_t k = 0; k < mask.size(); ++k) {
      nw[k] = lp(rng);
      old[k] = lp(rng);
      ref[k] = lp(rng);
    }
    auto nw2 = nw, old2 = old, ref2 = ref;
    bool any_obs = false;
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (mask[k]) continue;
      any_obs = true;
      nw2[k] += wild(rng);
      old2[k] += wild(rng);
      ref2[k] = std::numeric_limits<double>::quiet_NaN();
    }
    with_obs += any_obs;
    const double adv = lp(rng);
    if (clipped_surrogate(nw, old, mask, adv, 0.2) != clipped_surrogate(nw2, old2, mask, adv, 0.2)) ++changed;
    if (kl_term(nw, ref, mask) != kl_term(nw2, ref2, mask)) ++changed;
    ++checked;
  }
  return {changed == 0 && with_obs > 50,
          fmt("%zu trajectories (%zu with observations), %zu changed values", checked, with_obs, changed)};
}

// ---- A4

Outcome a4() {
  double worst = 0.0;
  std::size_t coords = 0;
  for (std::uint64_t b = 0; b < 10; ++b) {
    ToyBatchFixture fx(100 + b);
    const auto groups = fx.groups(100 + b);
    OptimConfig cfg;
    cfg.kl_coeff = 0.04;
    const auto batch = prepare_batch(fx.policy, groups);
    auto moved = fx.policy;
    std::mt19937_64 rng(b);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto& x : moved.parameters()) x += n(rng);
    const auto lg = grpo_loss_and_grad(moved, batch, cfg);
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < lg.grad.size(); ++i) {
      if (lg.grad[i] != 0.0) live.push_back(i);
    }
    if (live.size() < 20) return {false, fmt("batch %llu has %zu live coordinates", (unsigned long long)b, live.size())};
    std::shuffle(live.begin(), live.end(), rng);
    const double h = 1e-5;
    for (int c = 0; c < 20; ++c) {
      const std::size_t i = live[c];
      auto p = moved.parameters();
      const double keep = p[i];
      p[i] = keep + h;
      const double up = grpo_loss(moved, batch, cfg);
      p[i] = keep - h;
      const double down = grpo_loss(moved, batch, cfg);
      p[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - lg.grad[i]) / std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-6}));
      ++coords;
    }
  }
  return {worst <= 1e-4, fmt("%zu coordinates, max relative error %.2e", coords, worst)};
}

// ---- A5

Outcome a5() {
  const auto docs = random_corpus(100, 55);
  const CorpusIndex index = index_corpus(docs);
  std::mt19937_64 rng(5);
  std::size_t bad = 0, hits = 0;
  for (int q = 0; q < 20; ++q) {
    const std::string query = random_text(rng, 1 + rng() % 4);
    const auto got = retrieve(index, query, docs.size()).hits;
    const auto want = brute_force_bm25(docs, query, docs.size());
    hits += want.size();
    if (got.size() != want.size()) {
      ++bad;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].doc_id != want[i].doc_id || got[i].score != want[i].score) ++bad;
    }
  }
  return {bad == 0 && hits > 0, fmt("20 queries, %zu ranked hits, %zu mismatches", hits, bad)};
}

// ---- A6, A7, A9 share one world and one seeded policy

struct Toy {
  RunConfig cfg;
  std::unique_ptr<ToySetup> setup;
  std::optional<ToyPolicy> seeded;
  double seed_seconds = 0.0;
};

Toy& toy() {
  static Toy t = [] {
    Toy out;
    out.cfg.set("group_size", "8", "acceptance");
    const auto t0 = std::chrono::steady_clock::now();
    out.setup = make_toy_setup(out.cfg.world(), out.cfg.seed(), PromptTemplate::load_default());
    out.seeded.emplace(seed_toy_policy(out.setup->bundle.world, *out.setup->env, out.cfg.rollout(),
                                       out.setup->exemplars, out.cfg.seeding()));
    out.seed_seconds = seconds_since(t0);
    return out;
  }();
  return t;
}

std::vector<TrainLogEntry> train_run(const std::vector<TaskInstance>& data, RewardAblation abl) {
  auto& t = toy();
  RunConfig cfg = t.cfg;
  cfg.set("reward_ablation", abl == RewardAblation::NoKb ? "no_kb" : abl == RewardAblation::NoKbMinus ? "no_kb_minus" : "none",
          "acceptance");
  ToyPolicy p = *t.seeded;
  return train(p, *t.setup->env, data, cfg.train());
}

WindowSummary last20(const std::vector<TrainLogEntry>& log) { return summarize_window(log, log.size() - 20, log.size()); }

Outcome a6() {
  auto& t = toy();
  const auto data = toy_training_set(*t.seeded, *t.setup, t.cfg.probe(), TrainMix::Balanced,
                                     t.cfg.get_size("n_per_class"), t.cfg.seed());
  const auto full = train_run(data, RewardAblation::None);
  const auto nokb = train_run(data, RewardAblation::NoKb);
  const auto nokbm = train_run(data, RewardAblation::NoKbMinus);
  const auto first = summarize_window(full, 0, 20);
  const auto f = last20(full), a = last20(nokb), m = last20(nokbm);
  const double ratio = f.reward / first.reward;
  const double easy = f.easy_rate.value_or(1.0), hard = f.hard_rate.value_or(0.0);
  const double a_easy = a.easy_rate.value_or(0.0);
  const double m_hard = m.hard_rate.value_or(1.0);
  const double f_hem = f.hard_em.value_or(0.0), m_hem = m.hard_em.value_or(1.0);
  const bool pa = ratio >= 1.5;
  const bool pb = easy <= 0.3 && hard >= 0.7;
  const bool pc = a_easy >= 0.8 && m_hard <= 0.4 && m_hem < f_hem;
  return {pa && pb && pc && data.size() >= 200 && full.size() == 200,
          fmt("%zu tasks, %zu steps; (a) reward %.3f -> %.3f, x%.2f %s; (b) easy %.2f hard %.2f %s; "
              "(c) no_kb easy %.2f, no_kb_minus hard %.2f, hard EM %.2f vs %.2f %s",
              data.size(), full.size(), first.reward, f.reward, ratio, pa ? "ok" : "FAIL", easy, hard,
              pb ? "ok" : "FAIL", a_easy, m_hard, m_hem, f_hem, pc ? "ok" : "FAIL"),
          t.seed_seconds};
}

Outcome a7() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& t = toy();
  const double seed_s = seconds_since(t0);
  const auto tasks = plain_tasks(t.setup->bundle.tasks);
  ProbeConfig pc = t.cfg.probe();
  pc.exemplars = t.setup->exemplars;
  const auto labeled = apply_labels(tasks, probe_tasks(*t.seeded, tasks, pc, t.cfg.seed()));
  std::size_t agree = 0;
  std::vector<TaskInstance> easy, hard;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    agree += labeled[i].label == tasks[i].label;
    (labeled[i].label == Label::Easy ? easy : hard).push_back(labeled[i]);
  }
  const double rate = static_cast<double>(agree) / static_cast<double>(tasks.size());
  const std::size_t npc = std::min(easy.size(), hard.size());
  const auto bal = build_balanced(easy, hard, npc, t.cfg.seed());
  std::size_t n_easy = 0;
  std::set<std::string> ids;
  for (const auto& b : bal) {
    n_easy += b.label == Label::Easy;
    ids.insert(b.task_id);
  }
  const bool one_to_one = bal.size() == 2 * npc && n_easy == npc && ids.size() == bal.size();
  // Seeding runs inside this criterion only when nothing before it needed it.
  return {rate >= 0.95 && one_to_one,
          fmt("agreement %zu/%zu = %.3f at N=%zu; balanced %zu easy + %zu hard", agree, tasks.size(), rate,
              pc.n_samples, n_easy, bal.size() - n_easy),
          seed_s > 0.5 ? 0.0 : t.seed_seconds};
}

Outcome a8() {
  const auto corpus = load_protocol_corpus(std::string(IKEA_TEST_DATA_DIR) + "/protocol_corpus");
  std::size_t bad = 0, malformed = 0, truncated = 0, valid = 0;
  std::set<std::string> reasons;
  std::string first_bad;
  for (const auto& lt : corpus) {
    const auto m = protocol_mismatches(lt);
    if (!m.empty()) {
      ++bad;
      if (first_bad.empty()) first_bad = " first: " + lt.name + " (" + m.front() + ")";
    }
    const auto term = lt.labels.count("terminal") ? lt.labels.at("terminal") : "";
    if (lt.labels.count("valid") && lt.labels.at("valid") == "true") ++valid;
    else if (term == "truncated") ++truncated;
    else ++malformed;
    if (lt.labels.count("reason")) reasons.insert(lt.labels.at("reason"));
  }
  return {corpus.size() >= 20 && bad == 0,
          fmt("%zu transcripts (%zu valid, %zu truncated, %zu malformed, %zu distinct reasons), %zu disagreements%s",
              corpus.size(), valid, truncated, malformed, reasons.size(), bad, first_bad.c_str())};
}

Outcome a9() {
  auto& t = toy();
  const std::size_t npc = 60;
  double rate[3];
  const TrainMix mixes[3] = {TrainMix::EasyOnly, TrainMix::Balanced, TrainMix::HardOnly};
  for (int i = 0; i < 3; ++i) {
    const auto data = toy_training_set(*t.seeded, *t.setup, t.cfg.probe(), mixes[i], npc, t.cfg.seed());
    rate[i] = last20(train_run(data, RewardAblation::None)).retrieval_rate;
  }
  return {rate[0] < rate[1] && rate[1] < rate[2],
          fmt("final retrieval rate easy-only %.3f < balanced %.3f < hard-only %.3f (%zu tasks each)", rate[0],
              rate[1], rate[2], 2 * npc),
          t.seed_seconds};
}

struct Criterion {
  const char* name;
  double budget_s;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {{"A1", 1, a1},   {"A2", 5, a2},   {"A3", 5, a3},
                                      {"A4", 30, a4},  {"A5", 5, a5},   {"A7", 30, a7},
                                      {"A6", 300, a6}, {"A8", 1, a8},   {"A9", 600, a9}};
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0) + o.extra_seconds;
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %s  %s  [%.2fs of %.0fs%s]\n", c.name, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
