#pragma once

// Tagged action/observation grammar: per-turn parsing, transcript assembly,
// format validity and the action-token loss mask.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ikea/text.hpp"

namespace ikea {

/// `Raw` holds agent text that failed to parse; it only appears in
/// trajectories whose terminal state is Malformed.
enum class SegmentKind { Think, Search, Answer, Context, Raw };
enum class Source { Agent, Environment };
enum class Terminal { Answered, Truncated, Malformed };

std::string_view to_string(SegmentKind k);
std::string_view to_string(Source s);
std::string_view to_string(Terminal t);
SegmentKind segment_kind_from_string(std::string_view s);
Source source_from_string(std::string_view s);
Terminal terminal_from_string(std::string_view s);

/// Half-open token index range [lo, hi).
struct TokenSpan {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi - lo; }
  bool operator==(const TokenSpan&) const = default;
};

struct Segment {
  SegmentKind kind = SegmentKind::Think;
  std::string body;
  Source source = Source::Agent;
  std::string lead;   // whitespace before the opening tag
  std::string trail;  // whitespace after the closing tag (end of turn only)
  TokenSpan span;

  /// Exact bytes this segment covers in the trajectory stream.
  std::string text() const;
  bool operator==(const Segment&) const = default;
};

Segment make_segment(SegmentKind kind, std::string body, std::string lead = {},
                     std::string trail = {});

enum class MalformReason {
  Empty,
  MissingThink,
  MissingAction,
  RepeatedThink,
  SearchAndAnswer,
  TrailingText,
  StrayText,
  UnknownTag,
  NestedTag,
  UnclosedTag,
  UnmatchedClose,
  ContextTag,
};

std::string_view to_string(MalformReason r);

struct Malformation {
  std::size_t offset = 0;  // byte offset of the first violation
  MalformReason reason = MalformReason::Empty;
};

/// Result of parsing one agent emission. Parsing is total: malformed text is
/// reported through `error`, never thrown.
struct ActionParse {
  std::vector<Segment> segments;
  std::optional<Malformation> error;
  bool ok() const { return !error.has_value(); }
};

/// One turn must be `<think>..</think>` followed by exactly one of
/// `<search>..</search>` or `<answer>..</answer>`, with only whitespace
/// between and after. Tags are case-sensitive; `<context>` inside a body is
/// plain text.
ActionParse parse_action(std::string_view text);

struct ParsedTrajectory {
  std::vector<Segment> segments;
  Terminal terminal = Terminal::Truncated;
  std::optional<std::string> answer_text;

  std::string serialize() const;
  std::size_t token_count() const;
  std::size_t agent_turns() const;
  bool operator==(const ParsedTrajectory&) const = default;
};

/// Parses a full response transcript (agent turns interleaved with
/// environment `<context>` blocks, prompt excluded) and assigns token spans.
ParsedTrajectory parse_transcript(std::string_view text);

/// Tokenizes each segment with the harness tokenizer, writes the spans and
/// returns the concatenated token stream.
std::vector<std::string> assign_token_spans(ParsedTrajectory& traj);

struct FormatLimits {
  std::size_t max_turns = 6;
};

struct FormatCheck {
  bool valid = false;
  std::vector<std::string> reasons;
};

FormatCheck validate_format(const ParsedTrajectory& traj, const FormatLimits& limits);

class AbsentAnswerError : public Error {
 public:
  AbsentAnswerError() : Error("trajectory has no final answer") {}
};

/// Trimmed body of the final Answer segment.
std::string extract_answer(const ParsedTrajectory& traj);

/// 1 for tokens of agent segments, 0 for tokens of Context segments.
std::vector<std::uint8_t> compute_loss_mask(const ParsedTrajectory& traj);

}  // namespace ikea
