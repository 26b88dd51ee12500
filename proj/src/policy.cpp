#include "ikea/policy.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ikea {

namespace {

constexpr std::string_view kQuestionMarker = "Question:";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

std::optional<std::size_t> stop_position(std::string_view text,
                                         const std::vector<std::string>& stops) {
  std::optional<std::size_t> best;
  for (const auto& s : stops) {
    if (s.empty()) continue;
    auto pos = text.find(s);
    if (pos == std::string_view::npos) continue;
    const std::size_t end = pos + s.size();
    if (!best || end < *best) best = end;
  }
  return best;
}

std::string_view prompt_question(std::string_view prompt) {
  auto pos = prompt.rfind(kQuestionMarker);
  if (pos == std::string_view::npos) return {};
  auto line = prompt.substr(pos + kQuestionMarker.size());
  return trim(line.substr(0, line.find('\n')));
}

std::string_view prompt_transcript(std::string_view prompt) {
  auto pos = prompt.rfind(kQuestionMarker);
  if (pos == std::string_view::npos) return prompt;
  auto nl = prompt.find('\n', pos);
  return nl == std::string_view::npos ? std::string_view{} : prompt.substr(nl + 1);
}

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> default_turns)
    : default_turns_(std::move(default_turns)) {}

ScriptedPolicy::ScriptedPolicy(std::map<std::string, std::vector<std::string>> per_question,
                               std::vector<std::string> default_turns)
    : per_question_(std::move(per_question)), default_turns_(std::move(default_turns)) {}

std::shared_ptr<ScriptedPolicy> ScriptedPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open script: " + path);
  std::map<std::string, std::vector<std::string>> per_question;
  std::vector<std::string> fallback;
  if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
    std::string line;
    while (std::getline(in, line)) {
      if (is_blank(line)) continue;
      auto j = nlohmann::json::parse(line);
      auto turns = j.at("turns").get<std::vector<std::string>>();
      auto q = j.at("question").get<std::string>();
      if (q == "*") {
        fallback = std::move(turns);
      } else {
        per_question[q] = std::move(turns);
      }
    }
  } else {
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string all = ss.str();
    std::string cur;
    std::istringstream lines(all);
    std::string line;
    while (std::getline(lines, line)) {
      if (trim(line) == "---") {
        fallback.push_back(std::string(trim(cur)));
        cur.clear();
      } else {
        cur += line;
        cur += '\n';
      }
    }
    if (!is_blank(cur)) fallback.push_back(std::string(trim(cur)));
  }
  return std::make_shared<ScriptedPolicy>(std::move(per_question), std::move(fallback));
}

GenerationResponse ScriptedPolicy::generate(const GenerationRequest& req) const {
  const std::string question(prompt_question(req.prompt));
  const auto it = per_question_.find(question);
  const auto& turns = it != per_question_.end() ? it->second : default_turns_;
  if (turns.empty()) throw Error("scripted policy has no turns for question: " + question);

  const std::size_t turn = count_occurrences(prompt_transcript(req.prompt), kContextClose);
  std::string text = turns[std::min(turn, turns.size() - 1)];
  if (auto cut = stop_position(text, req.stop_sequences)) text.resize(*cut);

  GenerationResponse resp;
  resp.tokens = tokenize(text);
  if (resp.tokens.size() > req.max_tokens) {
    resp.tokens.resize(req.max_tokens);
    text.clear();
    for (const auto& t : resp.tokens) text += t;
  }
  resp.text = std::move(text);
  return resp;
}

}  // namespace ikea
