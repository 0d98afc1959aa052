#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "histanno/error.hpp"
#include "histanno/schema.hpp"

namespace histanno {

inline constexpr std::string_view kSentencePlaceholder = "{sentence}";

class TemplateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Prompt body with exactly one {sentence} slot.
class PromptTemplate {
 public:
  // Throws TemplateError unless the slot occurs exactly once.
  PromptTemplate(Language language, std::string body);

  Language language() const { return language_; }
  const std::string& body() const { return body_; }

 private:
  Language language_;
  std::string body_;
};

// The annotation prompts shipped under data/prompts.
const PromptTemplate& builtin_template(Language lang);
PromptTemplate load_template(Language lang, const std::filesystem::path& path);

// Substitutes the sentence verbatim; everything else stays byte-identical.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view sentence_text);

}  // namespace histanno
