#include "ikea/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ikea {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (is_blank(line)) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(n) + ": " + e.what());
    }
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<Document> parse_corpus_jsonl(const std::string& text) {
  std::vector<Document> docs;
  for_each_line(text, [&](const json& j) {
    docs.push_back(Document{j.at("doc_id").get<std::string>(), j.value("title", std::string()),
                            j.value("body", std::string())});
  });
  return docs;
}

std::string corpus_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    ojson j;
    j["doc_id"] = d.doc_id;
    j["title"] = d.title;
    j["body"] = d.body;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<Document> read_corpus(const std::string& path) { return parse_corpus_jsonl(read_file(path)); }

std::vector<TaskInstance> parse_tasks_jsonl(const std::string& text) {
  std::vector<TaskInstance> tasks;
  for_each_line(text, [&](const json& j) {
    TaskInstance t;
    t.task_id = j.at("task_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    const auto& g = j.at("golds");
    if (g.is_string()) {
      t.golds.push_back(g.get<std::string>());
    } else {
      t.golds = g.get<std::vector<std::string>>();
    }
    if (t.golds.empty()) throw Error("task " + t.task_id + " has no gold answers");
    t.label = label_from_string(j.value("label", std::string("unlabeled")));
    t.source = j.value("source", std::string());
    tasks.push_back(std::move(t));
  });
  return tasks;
}

std::string tasks_jsonl(const std::vector<TaskInstance>& tasks) {
  std::string out;
  for (const auto& t : tasks) {
    ojson j;
    j["task_id"] = t.task_id;
    j["question"] = t.question;
    j["golds"] = t.golds;
    j["label"] = std::string(to_string(t.label));
    j["source"] = t.source;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<TaskInstance> read_tasks(const std::string& path) { return parse_tasks_jsonl(read_file(path)); }

std::vector<ProbeRecord> parse_probe_jsonl(const std::string& text) {
  std::vector<ProbeRecord> out;
  for_each_line(text, [&](const json& j) {
    ProbeRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    for (const auto& s : j.at("samples")) {
      r.samples.push_back(ProbeSample{s.at("answer").get<std::string>(), s.at("em").get<int>()});
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::string probe_jsonl(const std::vector<ProbeRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ojson j;
    j["task_id"] = r.task_id;
    j["samples"] = ojson::array();
    for (const auto& s : r.samples) j["samples"].push_back(ojson{{"answer", s.answer}, {"em", s.em}});
    out += j.dump() + "\n";
  }
  return out;
}

std::string trajectory_json(const Trajectory& t, const std::string& traj_id) {
  ojson j;
  if (!traj_id.empty()) j["trajectory_id"] = traj_id;
  j["task_id"] = t.task.task_id;
  j["question"] = t.task.question;
  j["golds"] = t.task.golds;
  j["label"] = std::string(to_string(t.task.label));
  j["source"] = t.task.source;
  j["seed"] = t.seed;
  j["segments"] = ojson::array();
  for (const auto& s : t.parsed.segments) {
    ojson sj;
    sj["kind"] = std::string(to_string(s.kind));
    sj["body"] = s.body;
    sj["source"] = std::string(to_string(s.source));
    sj["span"] = {s.span.lo, s.span.hi};
    sj["lead"] = s.lead;
    sj["trail"] = s.trail;
    j["segments"].push_back(std::move(sj));
  }
  j["terminal"] = std::string(to_string(t.parsed.terminal));
  j["tokens"] = t.tokens;
  j["loss_mask"] = t.loss_mask;
  j["retrieval_count"] = t.retrieval_count;
  j["old_logprobs"] = t.old_logprobs ? ojson(*t.old_logprobs) : ojson(nullptr);
  if (t.reward) {
    ojson r;
    r["total"] = t.reward->total;
    r["format_valid"] = t.reward->format_valid;
    r["r_ans"] = t.reward->r_ans ? ojson(*t.reward->r_ans) : ojson(nullptr);
    r["r_kb"] = t.reward->r_kb ? ojson(*t.reward->r_kb) : ojson(nullptr);
    r["format_reasons"] = t.reward->format_reasons;
    j["reward"] = std::move(r);
  } else {
    j["reward"] = nullptr;
  }
  return j.dump();
}

Trajectory parse_trajectory_json(const std::string& line) {
  const json j = json::parse(line);
  Trajectory t;
  t.task.task_id = j.at("task_id").get<std::string>();
  t.task.question = j.value("question", std::string());
  if (j.contains("golds")) t.task.golds = j.at("golds").get<std::vector<std::string>>();
  t.task.label = label_from_string(j.value("label", std::string("unlabeled")));
  t.task.source = j.value("source", std::string());
  t.seed = j.value("seed", std::uint64_t{0});
  for (const auto& sj : j.at("segments")) {
    Segment s;
    s.kind = segment_kind_from_string(sj.at("kind").get<std::string>());
    s.body = sj.at("body").get<std::string>();
    s.source = source_from_string(sj.at("source").get<std::string>());
    s.span = TokenSpan{sj.at("span").at(0).get<std::size_t>(), sj.at("span").at(1).get<std::size_t>()};
    s.lead = sj.value("lead", std::string());
    s.trail = sj.value("trail", std::string());
    t.parsed.segments.push_back(std::move(s));
  }
  t.parsed.terminal = terminal_from_string(j.at("terminal").get<std::string>());
  for (auto it = t.parsed.segments.rbegin(); it != t.parsed.segments.rend(); ++it) {
    if (it->kind == SegmentKind::Answer) {
      if (t.parsed.terminal == Terminal::Answered) t.parsed.answer_text = std::string(trim(it->body));
      break;
    }
  }
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  t.loss_mask = j.at("loss_mask").get<std::vector<std::uint8_t>>();
  t.retrieval_count = j.value("retrieval_count", std::size_t{0});
  if (j.contains("old_logprobs") && !j.at("old_logprobs").is_null()) {
    t.old_logprobs = j.at("old_logprobs").get<std::vector<double>>();
  }
  if (j.contains("reward") && !j.at("reward").is_null()) {
    const auto& r = j.at("reward");
    RewardBreakdown b;
    b.total = r.at("total").get<double>();
    b.format_valid = r.value("format_valid", false);
    if (r.contains("r_ans") && !r.at("r_ans").is_null()) b.r_ans = r.at("r_ans").get<int>();
    if (r.contains("r_kb") && !r.at("r_kb").is_null()) b.r_kb = r.at("r_kb").get<double>();
    if (r.contains("format_reasons")) b.format_reasons = r.at("format_reasons").get<std::vector<std::string>>();
    t.reward = std::move(b);
  }
  return t;
}

std::string trajectory_id(const GroupBatch& g, std::size_t member) {
  return g.group_id + "#" + std::to_string(member);
}

std::string group_manifest_json(const GroupBatch& g) {
  ojson j;
  j["task_id"] = g.task.task_id;
  j["group_id"] = g.group_id;
  j["trajectory_ids"] = ojson::array();
  for (std::size_t i = 0; i < g.trajectories.size(); ++i) j["trajectory_ids"].push_back(trajectory_id(g, i));
  j["seed"] = g.seed;
  j["mu_r"] = g.mu_r;
  j["sigma_r"] = g.sigma_r;
  j["advantages"] = g.advantages;
  return j.dump();
}

std::string batch_export_jsonl(const std::vector<GroupBatch>& groups) {
  std::string out;
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const auto& t = g.trajectories[i];
      ojson j;
      j["task_id"] = g.task.task_id;
      j["group_id"] = g.group_id;
      j["tokens"] = t.tokens;
      j["loss_mask"] = t.loss_mask;
      j["old_logprobs"] = t.old_logprobs ? ojson(*t.old_logprobs) : ojson(nullptr);
      j["reward"] = t.reward ? ojson(t.reward->total) : ojson(nullptr);
      j["advantage"] = i < g.advantages.size() ? ojson(g.advantages[i]) : ojson(nullptr);
      out += j.dump() + "\n";
    }
  }
  return out;
}

std::string train_log_json(const TrainLogEntry& e) {
  ojson j;
  j["step"] = e.step;
  j["reward"] = e.reward;
  j["rt"] = e.rt;
  j["resp_len"] = e.resp_len;
  j["kl"] = e.kl;
  j["easy_rt"] = optional_number(e.easy_rt);
  j["hard_rt"] = optional_number(e.hard_rt);
  j["loss"] = e.loss;
  j["retrieval_rate"] = e.retrieval_rate;
  j["easy_rate"] = optional_number(e.easy_rate);
  j["hard_rate"] = optional_number(e.hard_rate);
  j["easy_em"] = optional_number(e.easy_em);
  j["hard_em"] = optional_number(e.hard_em);
  j["n_easy"] = e.n_easy;
  j["n_hard"] = e.n_hard;
  return j.dump();
}

std::string world_json(const WorldBundle& bundle) {
  const auto& w = bundle.world;
  ojson j;
  j["entities"] = w.entities;
  j["attributes"] = w.attributes;
  j["relation"] = w.relation;
  j["facts"] = ojson::array();
  for (const auto& [key, value] : w.facts) {
    j["facts"].push_back(ojson{{"entity", key.first}, {"attribute", key.second}, {"value", value}});
  }
  j["internal_subset"] = ojson::array();
  for (const auto& key : w.internal_subset) j["internal_subset"].push_back({key.first, key.second});
  j["drill_entities"] = w.drill_entities;
  j["tasks"] = ojson::array();
  for (const auto& t : bundle.tasks) {
    ojson tj;
    tj["task_id"] = t.task.task_id;
    tj["question"] = t.task.question;
    tj["golds"] = t.task.golds;
    tj["label"] = std::string(to_string(t.task.label));
    tj["source"] = t.task.source;
    tj["required"] = ojson::array();
    for (const auto& k : t.required) tj["required"].push_back({k.first, k.second});
    j["tasks"].push_back(std::move(tj));
  }
  return j.dump(2) + "\n";
}

}  // namespace ikea
