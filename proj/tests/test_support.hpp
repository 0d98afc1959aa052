#pragma once

// Fixture builders shared by the unit and acceptance suites.

#include <string>
#include <vector>

#include "histanno/schema.hpp"
#include "histanno/validate.hpp"

namespace test_support {

struct FrTok {
  std::string text, upos, xpos, lemma;
};

struct ZhTok {
  std::string text, upos, xpos;
  std::string ent = "O";  // "O", "B-GPE", "I-GPE", ...
};

inline histanno::AnnotatedSentence french_sentence(const std::string& id, const std::string& text,
                                                   const std::vector<FrTok>& toks,
                                                   const std::string& period = "1600-1700") {
  using namespace histanno;
  AnnotatedSentence s;
  s.id = id;
  s.text = text;
  s.language = Language::french;
  s.period = period;
  std::vector<std::string> texts;
  for (const auto& t : toks) texts.push_back(t.text);
  auto spans = reconstruct_offsets(text, texts, builtin_profile(Language::french));
  for (std::size_t i = 0; i < toks.size(); ++i) {
    TokenAnnotation a;
    a.token = spans[i];
    a.upos = toks[i].upos;
    a.xpos = toks[i].xpos;
    a.lemma = toks[i].lemma;
    a.dep = toks[i].upos == "PUNCT" ? "punct" : "dep";
    s.tokens.push_back(a);
  }
  s.provenance.model_id = "fixture";
  s.provenance.temperatures = {0.0};
  return s;
}

inline histanno::AnnotatedSentence chinese_sentence(const std::string& id, const std::string& text,
                                                    const std::vector<ZhTok>& toks,
                                                    const std::string& period = "1920-1929") {
  using namespace histanno;
  AnnotatedSentence s;
  s.id = id;
  s.text = text;
  s.language = Language::chinese;
  s.period = period;
  std::vector<std::string> texts;
  for (const auto& t : toks) texts.push_back(t.text);
  auto spans = reconstruct_offsets(text, texts, builtin_profile(Language::chinese));
  for (std::size_t i = 0; i < toks.size(); ++i) {
    TokenAnnotation a;
    a.token = spans[i];
    a.upos = toks[i].upos;
    a.xpos = toks[i].xpos;
    a.ent_iob = *parse_iob(toks[i].ent.substr(0, 1));
    if (toks[i].ent.size() > 2) a.ent_type = toks[i].ent.substr(2);
    s.tokens.push_back(a);
  }
  s.provenance.model_id = "fixture";
  s.provenance.temperatures = {0.1, 0.7};
  return s;
}

}  // namespace test_support
