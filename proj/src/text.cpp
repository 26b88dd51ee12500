#include "ikea/text.hpp"

#include <array>
#include <cctype>

namespace ikea {

namespace {

constexpr std::array<std::string_view, 8> kTags = {
    kThinkOpen,  kThinkClose,  kSearchOpen,  kSearchClose,
    kAnswerOpen, kAnswerClose, kContextOpen, kContextClose};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::size_t tag_at(std::string_view text, std::size_t pos) {
  if (pos >= text.size() || text[pos] != '<') return 0;
  for (auto tag : kTags) {
    if (text.compare(pos, tag.size(), tag) == 0) return tag.size();
  }
  return 0;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    while (i < n && is_space(text[i])) ++i;
    if (i == n) {
      tokens.emplace_back(text.substr(start));
      break;
    }
    if (std::size_t len = tag_at(text, i); len > 0) {
      i += len;
    } else {
      ++i;
      while (i < n && !is_space(text[i]) && tag_at(text, i) == 0) ++i;
    }
    tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string_view token_core(std::string_view token) {
  std::size_t i = 0;
  while (i < token.size() && is_space(token[i])) ++i;
  return token.substr(i);
}

std::vector<std::string> index_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      terms.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) terms.push_back(std::move(cur));
  return terms;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace ikea
