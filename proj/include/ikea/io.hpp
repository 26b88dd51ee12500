#pragma once

// JSONL readers and writers for every on-disk format.

#include <string>
#include <vector>

#include "ikea/dataset.hpp"
#include "ikea/rollout.hpp"
#include "ikea/trainer.hpp"
#include "ikea/world.hpp"

namespace ikea {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

// {doc_id, title, body}
std::vector<Document> parse_corpus_jsonl(const std::string& text);
std::string corpus_jsonl(const std::vector<Document>& docs);
std::vector<Document> read_corpus(const std::string& path);

// {task_id, question, golds, label, source}
std::vector<TaskInstance> parse_tasks_jsonl(const std::string& text);
std::string tasks_jsonl(const std::vector<TaskInstance>& tasks);
std::vector<TaskInstance> read_tasks(const std::string& path);

// {task_id, samples: [{answer, em}]}
std::vector<ProbeRecord> parse_probe_jsonl(const std::string& text);
std::string probe_jsonl(const std::vector<ProbeRecord>& records);

/// One trajectory log line: task_id, segments (with spans and surrounding
/// whitespace), terminal, tokens, loss_mask, retrieval_count, plus reward and
/// old_logprobs when present.
std::string trajectory_json(const Trajectory& t, const std::string& trajectory_id = {});
Trajectory parse_trajectory_json(const std::string& line);

/// {task_id, group_id, trajectory_ids, seed, mu_r, sigma_r, advantages}
std::string group_manifest_json(const GroupBatch& g);
std::string trajectory_id(const GroupBatch& g, std::size_t member);

/// One line per trajectory: {task_id, group_id, tokens, loss_mask,
/// old_logprobs|null, reward, advantage}.
std::string batch_export_jsonl(const std::vector<GroupBatch>& groups);

std::string train_log_json(const TrainLogEntry& e);

/// Facts, internal subset and tasks of a generated world.
std::string world_json(const WorldBundle& bundle);

}  // namespace ikea
