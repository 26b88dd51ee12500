#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "ikea/cli.hpp"
#include "ikea/eval.hpp"
#include "ikea/io.hpp"
#include "support.hpp"

using namespace ikea;
using namespace ikea::testing;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
  args.insert(args.begin(), "ikea");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  auto getenv_fn = [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, getenv_fn);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("config precedence") {
  TempDir dir("cfg");
  write_file(dir.file("run.cfg"), "# comment\nseed = 5\nsteps=9  # trailing\ngroup_size = 4\n");
  RunConfig cfg;
  CHECK(cfg.get("seed") == "0");
  cfg.merge_file(dir.file("run.cfg"));
  CHECK(cfg.seed() == 5);
  CHECK(cfg.origin("seed") == "file:" + dir.file("run.cfg"));
  cfg.merge_env([](const char* name) -> const char* { return std::string(name) == "IKEA_SEED" ? "6" : nullptr; });
  CHECK(cfg.seed() == 6);
  cfg.set("seed", "7", "flag");
  CHECK(cfg.seed() == 7);
  CHECK(cfg.optim().steps == 9);
  CHECK(cfg.rollout().group_size == 4);
  CHECK(cfg.resolved().find("seed = 7") != std::string::npos);
  CHECK_THROWS_AS(cfg.set("nope", "1", "flag"), ConfigError);
  CHECK_THROWS_AS(cfg.merge_text("garbage line\n", "x"), ConfigError);
  cfg.set("steps", "many", "flag");
  CHECK_THROWS_AS(cfg.optim(), ConfigError);
}

TEST_CASE("reward ablations") {
  RunConfig cfg;
  cfg.set("reward_ablation", "no_kb", "flag");
  CHECK(cfg.reward().r_kb_plus == 0.0);
  CHECK(cfg.reward().r_kb_minus == 0.0);
  cfg.set("reward_ablation", "no_kb_minus", "flag");
  CHECK(cfg.reward().r_kb_plus == 0.6);
  CHECK(cfg.reward().r_kb_minus == 0.0);
  cfg.set("reward_ablation", "none", "flag");
  cfg.set("r_kb_minus", "0.5", "flag");
  CHECK_THROWS(cfg.reward());
}

TEST_CASE("env names") { CHECK(env_name("max_turns") == "IKEA_MAX_TURNS"); }

TEST_CASE("unknown flag is a usage error") {
  const auto r = run({"eval", "--bogus", "1"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
}

TEST_CASE("missing required input is a usage error") {
  TempDir dir("cli");
  CHECK(run({"eval", "--run_dir", dir.path().string()}).code == kExitUsage);
}

TEST_CASE("eval happy path") {
  TempDir dir("cli");
  write_file(dir.file("c.jsonl"), corpus_jsonl(capital_docs()));
  write_file(dir.file("t.jsonl"),
             tasks_jsonl({task("a", "What is the capital of France?", {"Paris"}, Label::Easy, "toy"),
                          task("b", "What is the capital of Italy?", {"Rome"}, Label::Hard, "toy")}));
  write_file(dir.file("s.txt"), "<think>hmm</think><search>capital</search>\n---\n<think>ok</think><answer>Paris</answer>\n");
  const auto r = run({"eval", "--tasks", dir.file("t.jsonl"), "--corpus", dir.file("c.jsonl"), "--policy",
                      "scripted:" + dir.file("s.txt"), "--seed", "7", "--run-dir", dir.path().string(),
                      "--format", "jsonl"});
  CHECK(r.code == kExitOk);
  const auto report = parse_report_jsonl(r.out);
  CHECK(report.per_subset.at({"toy", Label::Easy}).em_mean == 1.0);
  CHECK(report.per_subset.at({"toy", Label::Hard}).em_mean == 0.0);
  CHECK(report.per_subset.at({"toy", Label::Hard}).rt_mean == 1.0);
  const auto manifest = read_file(dir.file("eval.manifest"));
  CHECK(manifest.find("seed = 7") != std::string::npos);
  CHECK(manifest.find("policy = scripted:") != std::string::npos);
}

TEST_CASE("runtime failures exit 2") {
  TempDir dir("cli");
  const auto r = run({"eval", "--tasks", dir.file("none.jsonl"), "--corpus", dir.file("none.jsonl"),
                      "--policy", "scripted:x", "--run_dir", dir.path().string()});
  CHECK(r.code == kExitRuntime);
}

TEST_CASE("world to balanced dataset pipeline") {
  TempDir dir("cli");
  const std::string d = dir.path().string();
  REQUIRE(run({"gen-world", "--out_dir", d, "--seed", "3", "--n_entities", "12", "--run_dir", d}).code == kExitOk);
  const auto tasks = read_tasks(dir.file("tasks.jsonl"));
  CHECK_FALSE(tasks.empty());
  CHECK_FALSE(read_corpus(dir.file("corpus.jsonl")).empty());

  // A scripted prober that always answers with one fixed string labels nearly
  // everything hard; the label split comes from the cache.
  write_file(dir.file("probe.txt"), " nothing\n");
  REQUIRE(run({"probe", "--tasks", dir.file("tasks.jsonl"), "--policy", "scripted:" + dir.file("probe.txt"),
               "--out", dir.file("probe.jsonl"), "--n_samples", "2", "--run_dir", d})
              .code == kExitOk);
  const auto probes = parse_probe_jsonl(read_file(dir.file("probe.jsonl")));
  CHECK(probes.size() == tasks.size());

  auto recs = probes;
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].samples[0].em = i % 2 == 0;
  write_file(dir.file("labels.jsonl"), probe_jsonl(recs));
  REQUIRE(run({"build-dataset", "--tasks", dir.file("tasks.jsonl"), "--probe_cache", dir.file("labels.jsonl"),
               "--n_per_class", "3", "--out", dir.file("set.jsonl"), "--run_dir", d})
              .code == kExitOk);
  const auto set = read_tasks(dir.file("set.jsonl"));
  std::size_t easy = 0;
  for (const auto& t : set) easy += t.label == Label::Easy;
  CHECK(set.size() == 6);
  CHECK(easy == 3);
  CHECK(run({"build-dataset", "--tasks", dir.file("tasks.jsonl"), "--probe_cache", dir.file("labels.jsonl"),
             "--n_per_class", "1000", "--run_dir", d})
            .code == kExitRuntime);
}

TEST_CASE("rollout and export-batch write parseable lines") {
  TempDir dir("cli");
  const std::string d = dir.path().string();
  write_file(dir.file("c.jsonl"), corpus_jsonl(capital_docs()));
  write_file(dir.file("t.jsonl"), tasks_jsonl({task("a", "What is the capital of France?", {"Paris"})}));
  write_file(dir.file("s.txt"), "<think>x</think><answer>Paris</answer>");
  const std::vector<std::string> common = {"--tasks", dir.file("t.jsonl"), "--corpus", dir.file("c.jsonl"),
                                           "--policy", "scripted:" + dir.file("s.txt"), "--group_size", "3",
                                           "--run_dir", d};
  auto args = common;
  args.insert(args.begin(), "rollout");
  const auto r = run(args);
  REQUIRE(r.code == kExitOk);
  std::istringstream lines(r.out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto t = parse_trajectory_json(line);
    CHECK(t.reward->total == 1.6);
    ++n;
  }
  CHECK(n == 3);
  CHECK(read_file(dir.file("rollout.manifest")).find("# groups") != std::string::npos);

  args = common;
  args.insert(args.begin(), "export-batch");
  const auto e = run(args);
  REQUIRE(e.code == kExitOk);
  CHECK(nlohmann::json::parse(e.out.substr(0, e.out.find('\n')))["advantage"] == 0.0);
}

TEST_CASE("flags override environment variables") {
  TempDir dir("cli");
  const std::string d = dir.path().string();
  REQUIRE(run({"gen-world", "--out_dir", d, "--run_dir", d}, {{"IKEA_SEED", "11"}, {"IKEA_N_ENTITIES", "10"}}).code == kExitOk);
  const auto manifest = read_file(dir.file("gen-world.manifest"));
  CHECK(manifest.find("seed = 11") != std::string::npos);
  CHECK(manifest.find("env") != std::string::npos);
  REQUIRE(run({"gen-world", "--out_dir", d, "--run_dir", d, "--seed", "12"}, {{"IKEA_SEED", "11"}}).code == kExitOk);
  CHECK(read_file(dir.file("gen-world.manifest")).find("seed = 12") != std::string::npos);
}

TEST_CASE("train-toy is deterministic") {
  TempDir dir("cli");
  const std::string d = dir.path().string();
  auto train = [&](const std::string& log) {
    return run({"train-toy", "--seed", "7", "--n_entities", "12", "--steps", "3", "--batch_tasks", "4",
                "--group_size", "4", "--n_per_class", "10", "--seed_epochs", "8", "--seed_lr", "16",
                "--drill_rounds", "1", "--toy_dim", "4096", "--log", dir.file(log), "--run_dir", d});
  };
  REQUIRE(train("a.jsonl").code == kExitOk);
  REQUIRE(train("b.jsonl").code == kExitOk);
  const auto a = read_file(dir.file("a.jsonl"));
  CHECK_FALSE(a.empty());
  CHECK(a == read_file(dir.file("b.jsonl")));
}
