#include <sstream>

#include "doctest.h"
#include "ikea/eval.hpp"
#include "support.hpp"

using namespace ikea;
using namespace ikea::testing;

namespace {

struct Fixture {
  CorpusIndex index = index_corpus(capital_docs());
  Environment env{index, tiny_prompt()};
  RolloutConfig cfg;
};

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "always-correct direct policy") {
  std::vector<TaskInstance> tasks = {task("a", "Q1", {"Paris"}, Label::Easy, "s1"),
                                     task("b", "Q2", {"paris"}, Label::Hard, "s2")};
  ScriptedPolicy p(std::vector<std::string>{"<think>x</think><answer>Paris</answer>"});
  const auto r = evaluate(p, env, tasks, cfg, 1);
  CHECK(r.per_subset.size() == 2);
  for (const auto& [k, s] : r.per_subset) {
    CHECK(s.em_mean == 1.0);
    CHECK(s.rt_mean == 0.0);
  }
  CHECK(r.overall_em == 1.0);
}

TEST_CASE_FIXTURE(Fixture, "search once then fail") {
  std::vector<TaskInstance> tasks = {task("a", "Q1", {"nothing"}, Label::Hard, "s")};
  ScriptedPolicy p(std::vector<std::string>{"<think>x</think><search>capital</search>", "<think>y</think><answer>dunno</answer>"});
  const auto r = evaluate(p, env, tasks, cfg, 1);
  const auto& s = r.per_subset.at({"s", Label::Hard});
  CHECK(s.em_mean == 0.0);
  CHECK(s.rt_mean == 1.0);
}

TEST_CASE_FIXTURE(Fixture, "mixed tasks match a hand count") {
  // Per question: answer and number of searches.
  ScriptedPolicy p({{"A", {"<think>x</think><answer>paris</answer>"}},
                    {"B", {"<think>x</think><search>q</search>", "<think>y</think><answer>rome</answer>"}},
                    {"C", {"<think>x</think><search>q</search>", "<think>y</think><search>r</search>",
                           "<think>z</think><answer>no</answer>"}},
                    {"D", {"bad output"}}});
  std::vector<TaskInstance> tasks = {task("1", "A", {"Paris"}, Label::Easy, "nq"),
                                     task("2", "B", {"Rome"}, Label::Hard, "nq"),
                                     task("3", "C", {"Oslo"}, Label::Hard, "nq"),
                                     task("4", "D", {"x"}, Label::Easy, "hq")};
  const auto r = evaluate(p, env, tasks, cfg, 1);
  REQUIRE(r.per_subset.size() == 3);
  CHECK(r.per_subset.at({"nq", Label::Easy}) == SubsetStats{1.0, 0.0, 1});
  CHECK(r.per_subset.at({"nq", Label::Hard}) == SubsetStats{0.5, 1.5, 2});
  CHECK(r.per_subset.at({"hq", Label::Easy}) == SubsetStats{0.0, 0.0, 1});
  CHECK(r.overall_em == doctest::Approx((1.0 + 0.5 + 0.0) / 3).epsilon(1e-15));
  CHECK(r.overall_rt == doctest::Approx(1.5 / 3).epsilon(1e-15));
}

TEST_CASE("emit_report") {
  EvalReport r;
  r.per_subset[{"nq", Label::Easy}] = {0.75, 0.25, 4};
  r.per_subset[{"nq", Label::Hard}] = {0.1, 1.7, 10};
  r.per_subset[{"hotpot", Label::Easy}] = {1.0 / 3, 0.0, 3};
  r.per_subset[{"hotpot", Label::Hard}] = {0.0, 2.0, 1};
  r.overall_em = 0.4;
  r.overall_rt = 1.0;
  const auto table = emit_report(r, ReportFormat::Table);
  CHECK(count_lines(table) == 1 + 4 + 1);
  CHECK(table.find("overall") != std::string::npos);

  const auto jsonl = emit_report(r, ReportFormat::Jsonl);
  CHECK(count_lines(jsonl) == 5);
  CHECK(parse_report_jsonl(jsonl) == r);
  CHECK(emit_report(r, ReportFormat::Jsonl) == jsonl);
  CHECK(emit_report(r, ReportFormat::Table) == table);
}
