#include "histanno/prompt.hpp"

#include "histanno/embedded_data.hpp"
#include "histanno/sentence_io.hpp"

namespace histanno {

namespace {

std::size_t count_slots(std::string_view body) {
  std::size_t n = 0;
  for (auto pos = body.find(kSentencePlaceholder); pos != std::string_view::npos;
       pos = body.find(kSentencePlaceholder, pos + kSentencePlaceholder.size()))
    ++n;
  return n;
}

}  // namespace

PromptTemplate::PromptTemplate(Language language, std::string body) : language_(language), body_(std::move(body)) {
  auto n = count_slots(body_);
  if (n != 1)
    throw TemplateError("prompt template must contain exactly one {sentence} placeholder, found " +
                        std::to_string(n));
}

const PromptTemplate& builtin_template(Language lang) {
  static const PromptTemplate french(Language::french, embedded::kFrenchPrompt);
  static const PromptTemplate chinese(Language::chinese, embedded::kChinesePrompt);
  return lang == Language::french ? french : chinese;
}

PromptTemplate load_template(Language lang, const std::filesystem::path& path) {
  return PromptTemplate(lang, read_file(path));
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view sentence_text) {
  if (sentence_text.empty()) throw ValidationError("cannot render a prompt for an empty sentence");
  const auto& body = tmpl.body();
  auto pos = body.find(kSentencePlaceholder);
  std::string out;
  out.reserve(body.size() + sentence_text.size());
  out.append(body, 0, pos);
  out.append(sentence_text);
  out.append(body, pos + kSentencePlaceholder.size());
  return out;
}

}  // namespace histanno
