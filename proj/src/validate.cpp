#include "histanno/validate.hpp"

#include "histanno/utf8.hpp"

namespace histanno {

namespace {

std::string tag_string(const EntityTag& t) {
  std::string s(1, to_char(t.iob));
  if (!t.type.empty()) s += "-" + t.type;
  return s;
}

}  // namespace

std::vector<std::string> validate_tags(const TokenAnnotation& a, const LanguageProfile& profile) {
  std::vector<std::string> out;
  const char* inventory = profile.language == Language::french ? "FTB" : "CTB";
  if (!profile.has_upos(a.upos)) out.push_back("upos " + a.upos + " not in UD inventory");
  if (!profile.has_xpos(a.xpos))
    out.push_back("xpos " + a.xpos + " not in " + inventory + " inventory");
  if (a.ent_iob == Iob::O) {
    if (!a.ent_type.empty()) out.push_back("type on O token");
  } else if (profile.typed_entities()) {
    if (a.ent_type.empty())
      out.push_back(std::string("untyped ") + to_char(a.ent_iob) + " token");
    else if (!profile.has_ner_type(a.ent_type))
      out.push_back("entity type " + a.ent_type + " not in NER inventory");
  } else if (!a.ent_type.empty()) {
    out.push_back("entity type " + a.ent_type + " on untyped profile");
  }
  return out;
}

std::vector<std::string> validate_fields(const TokenAnnotation& a, const LanguageProfile& profile) {
  std::vector<std::string> out;
  if (profile.requires_lemma && (!a.lemma || a.lemma->empty())) out.push_back("missing lemma");
  if (!profile.requires_lemma && a.lemma) out.push_back("lemma on profile without lemmas");
  if (profile.requires_dep && !a.dep) out.push_back("missing dep");
  if (a.dep && a.dep->empty()) out.push_back("empty dep");
  return out;
}

std::vector<EntityTag> entity_tags(const std::vector<TokenAnnotation>& tokens) {
  std::vector<EntityTag> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back({t.ent_iob, t.ent_type});
  return tags;
}

std::vector<IobViolation> validate_iob(const std::vector<EntityTag>& tags) {
  std::vector<IobViolation> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].iob != Iob::I) continue;
    if (i == 0) {
      out.push_back({i, "I at sentence start (" + tag_string(tags[i]) + ")"});
    } else if (tags[i - 1].iob == Iob::O) {
      out.push_back({i, "I after O (" + tag_string(tags[i]) + ")"});
    } else if (tags[i - 1].type != tags[i].type) {
      out.push_back({i, "I continues a different type (" + tag_string(tags[i - 1]) + " then " +
                            tag_string(tags[i]) + ")"});
    }
  }
  return out;
}

RepairedIob repair_iob(const std::vector<EntityTag>& tags) {
  RepairedIob out{tags, {}};
  for (const auto& v : validate_iob(tags)) {
    EntityTag before = out.tags[v.index];
    out.tags[v.index].iob = Iob::B;
    out.repairs.push_back({v.index, before, out.tags[v.index]});
  }
  return out;
}

std::vector<Token> reconstruct_offsets(std::string_view text,
                                       const std::vector<std::string>& token_texts,
                                       const LanguageProfile& profile) {
  if (token_texts.empty()) throw OffsetMismatchError(0, "empty token list");
  std::vector<Token> out;
  out.reserve(token_texts.size());
  std::size_t byte = 0;
  std::size_t cp = 0;
  for (std::size_t i = 0; i < token_texts.size(); ++i) {
    const std::string& tok = token_texts[i];
    if (tok.empty()) throw OffsetMismatchError(cp, "token " + std::to_string(i) + " is empty");
    if (profile.whitespace_script && i > 0 && byte < text.size() &&
        profile.separators.find(text[byte]) != std::string::npos) {
      out.back().trailing_space = true;
      ++byte;
      ++cp;
    }
    if (text.compare(byte, tok.size(), tok) != 0) {
      throw OffsetMismatchError(cp, "token " + std::to_string(i) + " '" + tok + "' does not match");
    }
    std::size_t len = utf8::length(tok);
    out.push_back({tok, cp, cp + len, false});
    byte += tok.size();
    cp += len;
  }
  if (byte != text.size()) throw OffsetMismatchError(cp, "text not covered by tokens");
  return out;
}

std::string join_tokens(const std::vector<TokenAnnotation>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += t.token.text;
    if (t.token.trailing_space) out += ' ';
  }
  return out;
}

std::vector<std::string> validate_sentence(const AnnotatedSentence& s, const LanguageProfile& profile) {
  std::vector<std::string> out;
  if (s.language != profile.language) out.push_back("language does not match profile");
  if (s.id.empty()) out.push_back("empty id");
  if (s.text.empty()) out.push_back("empty text");
  if (!utf8::is_valid(s.text)) out.push_back("text is not valid UTF-8");
  if (s.text.find_first_of("\r\n") != std::string::npos) out.push_back("line break in text");
  if (s.tokens.empty()) {
    out.push_back("no tokens");
    return out;
  }
  std::vector<std::string> texts;
  for (const auto& t : s.tokens) texts.push_back(t.token.text);
  try {
    auto expected = reconstruct_offsets(s.text, texts, profile);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (!(expected[i] == s.tokens[i].token)) {
        out.push_back("token " + std::to_string(i) + ": stored offsets disagree with text");
        break;
      }
    }
  } catch (const OffsetMismatchError& e) {
    out.push_back(e.what());
  }
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    for (auto& v : validate_tags(s.tokens[i], profile)) out.push_back("token " + std::to_string(i) + ": " + v);
    for (auto& v : validate_fields(s.tokens[i], profile))
      out.push_back("token " + std::to_string(i) + ": " + v);
  }
  for (auto& v : validate_iob(entity_tags(s.tokens)))
    out.push_back("token " + std::to_string(v.index) + ": " + v.message);
  return out;
}

}  // namespace histanno
