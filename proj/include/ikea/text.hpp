#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ikea {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The eight tag literals of the agent/observation protocol.
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kSearchOpen = "<search>";
inline constexpr std::string_view kSearchClose = "</search>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";
inline constexpr std::string_view kContextOpen = "<context>";
inline constexpr std::string_view kContextClose = "</context>";

/// Length of the protocol tag starting at `pos`, or 0 when none starts there.
std::size_t tag_at(std::string_view text, std::size_t pos);

/// Harness tokenizer. Each token is an optional run of leading whitespace
/// followed by either one protocol tag or a run of non-space characters that
/// stops before the next tag. A whitespace run at the very end is its own
/// token. Concatenating the tokens reproduces `text` exactly.
std::vector<std::string> tokenize(std::string_view text);

/// Token text without its leading whitespace.
std::string_view token_core(std::string_view token);

/// Lowercased alphanumeric runs; used for indexing, queries and features.
std::vector<std::string> index_terms(std::string_view text);

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace ikea
