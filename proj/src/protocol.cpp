#include "ikea/protocol.hpp"

#include <cctype>

namespace ikea {

namespace {

struct TagPair {
  SegmentKind kind;
  std::string_view open;
  std::string_view close;
};

constexpr TagPair kAgentTags[] = {
    {SegmentKind::Think, kThinkOpen, kThinkClose},
    {SegmentKind::Search, kSearchOpen, kSearchClose},
    {SegmentKind::Answer, kAnswerOpen, kAnswerClose},
};

std::string_view open_tag(SegmentKind k) {
  switch (k) {
    case SegmentKind::Think: return kThinkOpen;
    case SegmentKind::Search: return kSearchOpen;
    case SegmentKind::Answer: return kAnswerOpen;
    case SegmentKind::Context: return kContextOpen;
    case SegmentKind::Raw: return {};
  }
  return {};
}

std::string_view close_tag(SegmentKind k) {
  switch (k) {
    case SegmentKind::Think: return kThinkClose;
    case SegmentKind::Search: return kSearchClose;
    case SegmentKind::Answer: return kAnswerClose;
    case SegmentKind::Context: return kContextClose;
    case SegmentKind::Raw: return {};
  }
  return {};
}

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view lit) {
  return text.compare(pos, lit.size(), lit) == 0;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Matches `<name>` or `</name>` with an identifier name.
bool looks_like_tag(std::string_view text, std::size_t pos) {
  std::size_t i = pos + 1;
  if (i < text.size() && text[i] == '/') ++i;
  if (i >= text.size() || !std::isalpha(static_cast<unsigned char>(text[i]))) return false;
  while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
  return i < text.size() && text[i] == '>';
}

bool is_agent_tag(std::string_view text, std::size_t pos) {
  for (const auto& t : kAgentTags) {
    if (starts_with_at(text, pos, t.open) || starts_with_at(text, pos, t.close)) return true;
  }
  return false;
}

bool is_context_tag(std::string_view text, std::size_t pos) {
  return starts_with_at(text, pos, kContextOpen) || starts_with_at(text, pos, kContextClose);
}

ActionParse fail(std::vector<Segment> segs, std::size_t offset, MalformReason reason) {
  return ActionParse{std::move(segs), Malformation{offset, reason}};
}

}  // namespace

std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::Think: return "think";
    case SegmentKind::Search: return "search";
    case SegmentKind::Answer: return "answer";
    case SegmentKind::Context: return "context";
    case SegmentKind::Raw: return "raw";
  }
  return "raw";
}

std::string_view to_string(Source s) {
  return s == Source::Agent ? "agent" : "environment";
}

std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::Answered: return "answered";
    case Terminal::Truncated: return "truncated";
    case Terminal::Malformed: return "malformed";
  }
  return "malformed";
}

SegmentKind segment_kind_from_string(std::string_view s) {
  if (s == "think") return SegmentKind::Think;
  if (s == "search") return SegmentKind::Search;
  if (s == "answer") return SegmentKind::Answer;
  if (s == "context") return SegmentKind::Context;
  if (s == "raw") return SegmentKind::Raw;
  throw Error("unknown segment kind: " + std::string(s));
}

Source source_from_string(std::string_view s) {
  if (s == "agent") return Source::Agent;
  if (s == "environment") return Source::Environment;
  throw Error("unknown segment source: " + std::string(s));
}

Terminal terminal_from_string(std::string_view s) {
  if (s == "answered") return Terminal::Answered;
  if (s == "truncated") return Terminal::Truncated;
  if (s == "malformed") return Terminal::Malformed;
  throw Error("unknown terminal: " + std::string(s));
}

std::string_view to_string(MalformReason r) {
  switch (r) {
    case MalformReason::Empty: return "Empty";
    case MalformReason::MissingThink: return "MissingThink";
    case MalformReason::MissingAction: return "MissingAction";
    case MalformReason::RepeatedThink: return "RepeatedThink";
    case MalformReason::SearchAndAnswer: return "SearchAndAnswer";
    case MalformReason::TrailingText: return "TrailingText";
    case MalformReason::StrayText: return "StrayText";
    case MalformReason::UnknownTag: return "UnknownTag";
    case MalformReason::NestedTag: return "NestedTag";
    case MalformReason::UnclosedTag: return "UnclosedTag";
    case MalformReason::UnmatchedClose: return "UnmatchedClose";
    case MalformReason::ContextTag: return "ContextTag";
  }
  return "Empty";
}

std::string Segment::text() const {
  std::string out = lead;
  if (kind == SegmentKind::Raw) {
    out += body;
  } else {
    out += open_tag(kind);
    out += body;
    out += close_tag(kind);
  }
  out += trail;
  return out;
}

Segment make_segment(SegmentKind kind, std::string body, std::string lead, std::string trail) {
  Segment s;
  s.kind = kind;
  s.body = std::move(body);
  s.source = kind == SegmentKind::Context ? Source::Environment : Source::Agent;
  s.lead = std::move(lead);
  s.trail = std::move(trail);
  return s;
}

ActionParse parse_action(std::string_view text) {
  std::vector<Segment> segs;
  std::size_t pos = 0;
  const std::size_t n = text.size();

  while (true) {
    const std::size_t ws_begin = pos;
    while (pos < n && is_space(text[pos])) ++pos;
    if (pos == n) {
      if (segs.empty()) return fail({}, ws_begin, MalformReason::Empty);
      segs.back().trail = std::string(text.substr(ws_begin));
      break;
    }
    if (text[pos] != '<') return fail(std::move(segs), pos, MalformReason::StrayText);

    const TagPair* tag = nullptr;
    for (const auto& t : kAgentTags) {
      if (starts_with_at(text, pos, t.open)) tag = &t;
    }
    if (tag == nullptr) {
      if (is_context_tag(text, pos)) return fail(std::move(segs), pos, MalformReason::ContextTag);
      if (is_agent_tag(text, pos)) return fail(std::move(segs), pos, MalformReason::UnmatchedClose);
      if (looks_like_tag(text, pos)) return fail(std::move(segs), pos, MalformReason::UnknownTag);
      return fail(std::move(segs), pos, MalformReason::StrayText);
    }

    // Ordering: Think first, then exactly one Search or Answer, then nothing.
    if (segs.empty() && tag->kind != SegmentKind::Think) {
      return fail(std::move(segs), pos, MalformReason::MissingThink);
    }
    if (segs.size() == 1 && tag->kind == SegmentKind::Think) {
      return fail(std::move(segs), pos, MalformReason::RepeatedThink);
    }
    if (segs.size() == 2) {
      const bool other_action = tag->kind != SegmentKind::Think && tag->kind != segs[1].kind;
      return fail(std::move(segs), pos,
                  other_action ? MalformReason::SearchAndAnswer : MalformReason::TrailingText);
    }

    const std::size_t open_pos = pos;
    const std::size_t body_begin = pos + tag->open.size();
    std::size_t i = body_begin;
    bool closed = false;
    while (i < n) {
      if (text[i] == '<') {
        if (starts_with_at(text, i, tag->close)) {
          closed = true;
          break;
        }
        if (is_agent_tag(text, i)) return fail(std::move(segs), i, MalformReason::NestedTag);
        if (!is_context_tag(text, i) && looks_like_tag(text, i)) {
          return fail(std::move(segs), i, MalformReason::UnknownTag);
        }
      }
      ++i;
    }
    if (!closed) return fail(std::move(segs), open_pos, MalformReason::UnclosedTag);

    segs.push_back(make_segment(tag->kind, std::string(text.substr(body_begin, i - body_begin)),
                                std::string(text.substr(ws_begin, open_pos - ws_begin))));
    pos = i + tag->close.size();
  }

  if (segs.size() < 2) return fail(std::move(segs), n, MalformReason::MissingAction);
  return ActionParse{std::move(segs), std::nullopt};
}

std::string ParsedTrajectory::serialize() const {
  std::string out;
  for (const auto& s : segments) out += s.text();
  return out;
}

std::size_t ParsedTrajectory::token_count() const {
  return segments.empty() ? 0 : segments.back().span.hi;
}

std::size_t ParsedTrajectory::agent_turns() const {
  std::size_t turns = 0;
  for (const auto& s : segments) {
    if (s.source == Source::Agent && s.kind != SegmentKind::Think) ++turns;
  }
  return turns;
}

std::vector<std::string> assign_token_spans(ParsedTrajectory& traj) {
  std::vector<std::string> tokens;
  for (auto& seg : traj.segments) {
    auto toks = tokenize(seg.text());
    seg.span = TokenSpan{tokens.size(), tokens.size() + toks.size()};
    for (auto& t : toks) tokens.push_back(std::move(t));
  }
  return tokens;
}

ParsedTrajectory parse_transcript(std::string_view text) {
  ParsedTrajectory traj;
  std::size_t pos = 0;
  const std::size_t n = text.size();

  auto malformed_rest = [&](std::size_t from) {
    traj.segments.push_back(make_segment(SegmentKind::Raw, std::string(text.substr(from))));
    traj.terminal = Terminal::Malformed;
  };

  while (true) {
    if (is_blank(text.substr(pos))) {
      if (pos < n && !traj.segments.empty()) traj.segments.back().trail += std::string(text.substr(pos));
      traj.terminal = Terminal::Truncated;
      break;
    }
    // An agent turn runs to its first stop sequence.
    const std::size_t s_end = text.find(kSearchClose, pos);
    const std::size_t a_end = text.find(kAnswerClose, pos);
    std::size_t end = n;
    if (s_end != std::string_view::npos) end = s_end + kSearchClose.size();
    if (a_end != std::string_view::npos && (s_end == std::string_view::npos || a_end < s_end)) {
      end = a_end + kAnswerClose.size();
    }
    const auto turn = parse_action(text.substr(pos, end - pos));
    if (!turn.ok()) {
      malformed_rest(pos);
      break;
    }
    for (const auto& s : turn.segments) traj.segments.push_back(s);
    pos = end;

    if (traj.segments.back().kind == SegmentKind::Answer) {
      if (is_blank(text.substr(pos))) {
        traj.segments.back().trail += std::string(text.substr(pos));
        traj.terminal = Terminal::Answered;
      } else {
        malformed_rest(pos);
      }
      break;
    }

    // After a search, the environment block follows.
    std::size_t ws_end = pos;
    while (ws_end < n && is_space(text[ws_end])) ++ws_end;
    if (!starts_with_at(text, ws_end, kContextOpen)) continue;
    const std::size_t body_begin = ws_end + kContextOpen.size();
    const std::size_t close = text.find(kContextClose, body_begin);
    if (close == std::string_view::npos) {
      malformed_rest(pos);
      break;
    }
    traj.segments.push_back(make_segment(SegmentKind::Context,
                                         std::string(text.substr(body_begin, close - body_begin)),
                                         std::string(text.substr(pos, ws_end - pos))));
    pos = close + kContextClose.size();
  }

  if (traj.terminal == Terminal::Answered) {
    traj.answer_text = std::string(trim(traj.segments.back().body));
  }
  assign_token_spans(traj);
  return traj;
}

FormatCheck validate_format(const ParsedTrajectory& traj, const FormatLimits& limits) {
  FormatCheck check;
  auto& reasons = check.reasons;

  if (traj.terminal != Terminal::Answered) {
    reasons.push_back("terminal state is " + std::string(to_string(traj.terminal)));
  }
  std::size_t answers = 0;
  std::size_t turns = 0;
  bool expect_think = true;
  bool expect_context_allowed = false;
  for (std::size_t i = 0; i < traj.segments.size(); ++i) {
    const auto& s = traj.segments[i];
    const bool env_kind = s.kind == SegmentKind::Context;
    if ((s.source == Source::Environment) != env_kind) {
      reasons.push_back("segment " + std::to_string(i) + " has the wrong source");
    }
    switch (s.kind) {
      case SegmentKind::Raw:
        reasons.push_back("unparsed agent text at segment " + std::to_string(i));
        break;
      case SegmentKind::Think:
        if (!expect_think) reasons.push_back("think out of order at segment " + std::to_string(i));
        expect_think = false;
        expect_context_allowed = false;
        break;
      case SegmentKind::Search:
      case SegmentKind::Answer:
        if (expect_think) reasons.push_back("action without think at segment " + std::to_string(i));
        expect_think = true;
        ++turns;
        expect_context_allowed = s.kind == SegmentKind::Search;
        if (s.kind == SegmentKind::Answer) {
          ++answers;
          if (i + 1 != traj.segments.size()) reasons.push_back("content after the answer");
        }
        break;
      case SegmentKind::Context:
        if (!expect_context_allowed) reasons.push_back("context not preceded by a search");
        expect_context_allowed = false;
        break;
    }
    if (!is_blank(s.lead) || !is_blank(s.trail)) {
      reasons.push_back("agent text outside tags at segment " + std::to_string(i));
    }
  }
  if (answers != 1) reasons.push_back("expected exactly one answer, found " + std::to_string(answers));
  if (turns > limits.max_turns) reasons.push_back("turn limit exceeded");
  check.valid = reasons.empty();
  return check;
}

std::string extract_answer(const ParsedTrajectory& traj) {
  if (traj.terminal != Terminal::Answered) throw AbsentAnswerError();
  for (auto it = traj.segments.rbegin(); it != traj.segments.rend(); ++it) {
    if (it->kind == SegmentKind::Answer) return std::string(trim(it->body));
  }
  throw AbsentAnswerError();
}

std::vector<std::uint8_t> compute_loss_mask(const ParsedTrajectory& traj) {
  std::vector<std::uint8_t> mask(traj.token_count(), 1);
  for (const auto& s : traj.segments) {
    if (s.source != Source::Environment) continue;
    for (std::size_t t = s.span.lo; t < s.span.hi; ++t) mask[t] = 0;
  }
  return mask;
}

}  // namespace ikea
