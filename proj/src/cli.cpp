#include "ikea/cli.hpp"

#include <omp.h>

#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "ikea/eval.hpp"
#include "ikea/io.hpp"
#include "ikea/remote_policy.hpp"
#include "ikea/toy_policy.hpp"
#include "ikea/trainer.hpp"

namespace ikea {

namespace fs = std::filesystem;

PolicyHandle make_policy(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("policy must be kind:target, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string target = spec.substr(colon + 1);
  if (kind == "scripted") return ScriptedPolicy::load(target);
  if (kind == "toy") return std::make_shared<ToyPolicy>(ToyPolicy::load(target));
  if (kind == "remote") return std::make_shared<RemotePolicy>(target);
  throw ConfigError("unknown policy kind '" + kind + "' (scripted, toy, remote)");
}

namespace {

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& err;
  std::string command;
};

const std::string& require(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw ConfigError("missing required --" + key);
  return v;
}

PromptTemplate prompt_of(const RunConfig& cfg) {
  const std::string& p = cfg.get("prompt");
  return p.empty() ? PromptTemplate::load_default() : PromptTemplate::load(p);
}

ProbeConfig probe_of(const RunConfig& cfg) {
  ProbeConfig pc = cfg.probe();
  if (pc.exemplars.empty()) pc.exemplars = load_exemplars(std::string(IKEA_ASSET_DIR) + "/exemplars.txt");
  return pc;
}

void write_or_print(const Context& ctx, const std::string& key, const std::string& text) {
  const std::string& path = ctx.cfg.get(key);
  if (path.empty()) {
    ctx.out << text;
  } else {
    write_file(path, text);
  }
}

void write_manifest(const Context& ctx, const std::string& extra = {}) {
  const fs::path dir = ctx.cfg.get("run_dir");
  fs::create_directories(dir);
  std::string text = "# ikea " + ctx.command + "\n" + ctx.cfg.resolved();
  if (!extra.empty()) text += extra;
  write_file((dir / (ctx.command + ".manifest")).string(), text);
}

int cmd_build_corpus(const Context& ctx) {
  auto docs = read_corpus(require(ctx.cfg, "input"));
  const auto index = index_corpus(docs);
  write_or_print(ctx, "out", corpus_jsonl(index.documents()));
  ctx.err << "documents: " << index.size() << "  terms: " << index.vocabulary_size()
          << "  avg_len: " << index.average_length() << "\n";
  write_manifest(ctx);
  return kExitOk;
}

int cmd_gen_world(const Context& ctx) {
  const fs::path dir = require(ctx.cfg, "out_dir");
  fs::create_directories(dir);
  const auto bundle = generate_world(ctx.cfg.seed(), ctx.cfg.world());
  write_file((dir / "world.json").string(), world_json(bundle));
  write_file((dir / "corpus.jsonl").string(), corpus_jsonl(bundle.docs));
  write_file((dir / "tasks.jsonl").string(), tasks_jsonl(plain_tasks(bundle.tasks)));
  std::string ex;
  for (const auto& e : world_exemplars(bundle.world)) ex += e + "\n\n";
  write_file((dir / "exemplars.txt").string(), ex);
  ctx.err << "entities: " << bundle.world.entities.size() << "  facts: " << bundle.world.facts.size()
          << "  tasks: " << bundle.tasks.size() << "\n";
  write_manifest(ctx);
  return kExitOk;
}

int cmd_probe(const Context& ctx) {
  const auto tasks = read_tasks(require(ctx.cfg, "tasks"));
  const auto policy = make_policy(require(ctx.cfg, "policy"));
  const auto records = probe_tasks(*policy, tasks, probe_of(ctx.cfg), ctx.cfg.seed());
  write_or_print(ctx, "out", probe_jsonl(records));
  std::size_t easy = 0;
  for (const auto& r : records) easy += label_question(r.samples) == Label::Easy;
  ctx.err << "easy: " << easy << "  hard: " << records.size() - easy << "\n";
  write_manifest(ctx);
  return kExitOk;
}

int cmd_build_dataset(const Context& ctx) {
  auto tasks = read_tasks(require(ctx.cfg, "tasks"));
  const std::string& cache = ctx.cfg.get("probe_cache");
  if (!cache.empty()) tasks = apply_labels(tasks, parse_probe_jsonl(read_file(cache)));
  std::vector<TaskInstance> easy, hard;
  for (const auto& t : tasks) {
    if (t.label == Label::Easy) easy.push_back(t);
    if (t.label == Label::Hard) hard.push_back(t);
  }
  const auto out = build_balanced(easy, hard, ctx.cfg.get_size("n_per_class"), ctx.cfg.seed());
  write_or_print(ctx, "out", tasks_jsonl(out));
  write_manifest(ctx);
  return kExitOk;
}

struct Loaded {
  std::unique_ptr<CorpusIndex> index;
  std::unique_ptr<Environment> env;
};

Loaded load_env(const RunConfig& cfg) {
  Loaded l;
  l.index = std::make_unique<CorpusIndex>(index_corpus(read_corpus(require(cfg, "corpus"))));
  l.env = std::make_unique<Environment>(*l.index, prompt_of(cfg));
  return l;
}

std::vector<GroupBatch> collect_groups(const Context& ctx, const std::vector<TaskInstance>& tasks,
                                       const Policy& policy, const Environment& env) {
  const auto rc = ctx.cfg.rollout();
  const auto reward = ctx.cfg.reward();
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < tasks.size(); ++i) seeds.push_back(ctx.cfg.seed() + i * rc.group_size);
  auto groups = run_groups(policy, env, tasks, rc, seeds);
  for (auto& g : groups) {
    for (auto& t : g.trajectories) total_reward(t, g.task.golds, reward, rc.limits());
    fill_group_statistics(g);
  }
  return groups;
}

int cmd_rollout(const Context& ctx) {
  const auto tasks = read_tasks(require(ctx.cfg, "tasks"));
  const auto loaded = load_env(ctx.cfg);
  const auto policy = make_policy(require(ctx.cfg, "policy"));
  const auto groups = collect_groups(ctx, tasks, *policy, *loaded.env);
  std::string traj, manifest;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      traj += trajectory_json(g.trajectories[i], trajectory_id(g, i)) + "\n";
    }
    manifest += group_manifest_json(g) + "\n";
  }
  write_or_print(ctx, "out", traj);
  write_manifest(ctx, "# groups\n" + manifest);
  return kExitOk;
}

int cmd_export_batch(const Context& ctx) {
  const auto tasks = read_tasks(require(ctx.cfg, "tasks"));
  const auto loaded = load_env(ctx.cfg);
  const auto policy = make_policy(require(ctx.cfg, "policy"));
  write_or_print(ctx, "out", batch_export_jsonl(collect_groups(ctx, tasks, *policy, *loaded.env)));
  write_manifest(ctx);
  return kExitOk;
}

int cmd_eval(const Context& ctx) {
  const auto tasks = read_tasks(require(ctx.cfg, "tasks"));
  const auto loaded = load_env(ctx.cfg);
  const auto policy = make_policy(require(ctx.cfg, "policy"));
  const std::string fmt = to_lower(ctx.cfg.get("format"));
  if (fmt != "table" && fmt != "jsonl") throw ConfigError("format: expected table | jsonl");
  const auto run = evaluate_with_trajectories(*policy, *loaded.env, tasks, ctx.cfg.rollout(),
                                              ctx.cfg.seed(), ctx.cfg.reward());
  write_or_print(ctx, "out",
                 emit_report(run.report, fmt == "jsonl" ? ReportFormat::Jsonl : ReportFormat::Table));
  const std::string& log = ctx.cfg.get("log");
  if (!log.empty()) {
    std::string text;
    for (const auto& t : run.trajectories) text += trajectory_json(t) + "\n";
    write_file(log, text);
  }
  write_manifest(ctx);
  return kExitOk;
}

int cmd_train_toy(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto setup = make_toy_setup(cfg.world(), cfg.seed(), prompt_of(cfg));
  const TrainConfig tc = cfg.train();
  ToyPolicy policy = seed_toy_policy(setup->bundle.world, *setup->env, tc.rollout, setup->exemplars,
                                     cfg.seeding());
  ProbeConfig pc = cfg.probe();
  const auto dataset = toy_training_set(policy, *setup, pc, train_mix_from_string(cfg.get("train_mix")),
                                        cfg.get_size("n_per_class"), cfg.seed());
  std::string log_text;
  train(policy, *setup->env, dataset, tc, [&](const TrainLogEntry& e) {
    log_text += train_log_json(e) + "\n";
  });
  const std::string& log = cfg.get("log");
  if (log.empty()) {
    ctx.out << log_text;
  } else {
    write_file(log, log_text);
  }
  if (!cfg.get("out").empty()) policy.save(cfg.get("out"));
  write_manifest(ctx);
  return kExitOk;
}

const std::map<std::string, std::pair<std::string, int (*)(const Context&)>>& commands() {
  static const std::map<std::string, std::pair<std::string, int (*)(const Context&)>> c = {
      {"build-corpus", {"validate and index a corpus JSONL (--input), write it normalized", cmd_build_corpus}},
      {"gen-world", {"generate a synthetic world into --out_dir", cmd_gen_world}},
      {"probe", {"sample direct answers per task and write the probe cache", cmd_probe}},
      {"build-dataset", {"label tasks from a probe cache and draw a balanced set", cmd_build_dataset}},
      {"rollout", {"run G rollouts per task and write the trajectory log", cmd_rollout}},
      {"train-toy", {"seed, probe and GRPO-train the toy policy on a synthetic world", cmd_train_toy}},
      {"eval", {"greedy evaluation with an EM/RT report", cmd_eval}},
      {"export-batch", {"roll out and export a training batch for external trainers", cmd_export_batch}},
  };
  return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const std::function<const char*(const char*)>& getenv_fn) {
  CLI::App app{"IKEA adaptive search agent harness"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file");

  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, spec] : commands()) {
    CLI::App* sub = app.add_subcommand(name, spec.first);
    sub->add_option("--config", config_path, "flat key = value config file");
    for (const auto& k : RunConfig::keys()) {
      std::string names = "--" + k.name;
      if (k.name.find('_') != std::string::npos) {
        std::string dashed = k.name;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        names += ",--" + dashed;
      }
      sub->add_option(names, flag_values[name + "\x1f" + k.name], k.help + " [" + k.default_value + "]");
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    cfg.merge_env(getenv_fn);
    for (const auto& k : RunConfig::keys()) {
      CLI::Option* opt = subs[command]->get_option("--" + k.name);
      if (opt->count() > 0) cfg.set(k.name, flag_values[command + "\x1f" + k.name], "flag");
    }
    if (const auto workers = cfg.get_size("workers"); workers > 0) {
      omp_set_num_threads(static_cast<int>(workers));
    }
    Context ctx{cfg, out, err, command};
    return commands().at(command).second(ctx);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace ikea
