#pragma once

#include <string>
#include <string_view>

namespace ikea {

/// System prompt with `{question}` and `{max_searches}` placeholders. Loaded
/// from a text asset so it can be edited without a rebuild.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

  static PromptTemplate load(const std::string& path);
  static PromptTemplate load_default();
  static std::string default_path();

  /// Rendered prompt; always ends with a newline after the question.
  std::string render(std::string_view question, std::size_t max_searches) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

}  // namespace ikea
