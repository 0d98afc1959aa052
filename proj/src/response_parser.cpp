#include "histanno/response_parser.hpp"

#include <set>

#include <json.hpp>

#include "histanno/validate.hpp"

namespace histanno {

namespace {

const std::set<std::string> kFrenchTokenKeys = {"text", "pos", "tag", "lemma", "dep", "ent"};
const std::set<std::string> kChineseTokenKeys = {"text", "pos", "tag", "ent_iob_", "ent_type_"};

ParseError fail(ParseErrorKind kind, std::string message) { return {kind, std::move(message)}; }

std::optional<ParseError> check_keys(const nlohmann::json& obj, const std::set<std::string>& required,
                                     const std::set<std::string>& optional, const std::string& where) {
  for (const auto& key : required)
    if (!obj.contains(key)) return fail(ParseErrorKind::missing_key, where + ": missing key \"" + key + "\"");
  for (const auto& [key, value] : obj.items()) {
    if (!required.count(key) && !optional.count(key))
      return fail(ParseErrorKind::missing_key, where + ": unknown key \"" + key + "\"");
    if (key != "tokens" && !value.is_string())
      return fail(ParseErrorKind::malformed_json, where + ": key \"" + key + "\" is not a string");
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::malformed_json: return "malformed-json";
    case ParseErrorKind::missing_key: return "missing-key";
    case ParseErrorKind::tag_violation: return "tag-violation";
    case ParseErrorKind::offset_mismatch: return "offset-mismatch";
  }
  return "malformed-json";
}

std::optional<std::string_view> extract_json_object(std::string_view raw) {
  auto start = raw.find('{');
  while (start != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) return raw.substr(start, i - start + 1);
      }
    }
    // Unbalanced from this brace; no later brace can close either.
    return std::nullopt;
  }
  return std::nullopt;
}

std::variant<AnnotatedSentence, ParseError> parse_response(std::string_view raw, const CorpusRecord& record,
                                                           const LanguageProfile& profile) {
  auto object = extract_json_object(raw);
  if (!object) return fail(ParseErrorKind::malformed_json, "no balanced JSON object in response");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(*object);
  } catch (const nlohmann::json::exception& e) {
    return fail(ParseErrorKind::malformed_json, e.what());
  }

  const bool french = profile.language == Language::french;
  std::set<std::string> top_required = {"tokens"};
  std::set<std::string> top_optional;
  if (french)
    top_optional.insert("text");
  else
    top_required.insert("text");
  if (auto err = check_keys(root, top_required, top_optional, "response")) return *err;
  if (!root["tokens"].is_array()) return fail(ParseErrorKind::malformed_json, "\"tokens\" is not an array");
  if (root["tokens"].empty()) return fail(ParseErrorKind::offset_mismatch, "empty token list");
  if (root.contains("text") && root["text"].get<std::string>() != record.text)
    return fail(ParseErrorKind::offset_mismatch, "echoed text differs from the input sentence");

  const auto& token_keys = french ? kFrenchTokenKeys : kChineseTokenKeys;
  AnnotatedSentence s;
  s.id = record.id;
  s.text = record.text;
  s.language = profile.language;
  s.period = record.period;
  std::vector<std::string> texts;
  std::size_t index = 0;
  for (const auto& tj : root["tokens"]) {
    std::string where = "token " + std::to_string(index++);
    if (!tj.is_object()) return fail(ParseErrorKind::malformed_json, where + " is not an object");
    if (auto err = check_keys(tj, token_keys, {}, where)) return *err;
    TokenAnnotation a;
    a.token.text = tj["text"].get<std::string>();
    a.upos = tj["pos"].get<std::string>();
    a.xpos = tj["tag"].get<std::string>();
    if (french) {
      a.lemma = tj["lemma"].get<std::string>();
      a.dep = tj["dep"].get<std::string>();
      // Letter-only layer: "B-PER" keeps the letter, the type is dropped.
      auto ent = tj["ent"].get<std::string>();
      auto iob = parse_iob(ent.substr(0, 1));
      if (!iob || (ent.size() > 1 && (ent[1] != '-' || *iob == Iob::O)))
        return fail(ParseErrorKind::tag_violation, where + ": bad entity tag \"" + ent + "\"");
      a.ent_iob = *iob;
    } else {
      auto iob = parse_iob(tj["ent_iob_"].get<std::string>());
      if (!iob)
        return fail(ParseErrorKind::tag_violation,
                    where + ": bad ent_iob_ \"" + tj["ent_iob_"].get<std::string>() + "\"");
      a.ent_iob = *iob;
      a.ent_type = tj["ent_type_"].get<std::string>();
    }
    texts.push_back(a.token.text);
    s.tokens.push_back(std::move(a));
  }

  try {
    auto spans = reconstruct_offsets(record.text, texts, profile);
    for (std::size_t i = 0; i < spans.size(); ++i) s.tokens[i].token = spans[i];
  } catch (const OffsetMismatchError& e) {
    return fail(ParseErrorKind::offset_mismatch, e.what());
  }

  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    auto fields = validate_fields(s.tokens[i], profile);
    if (!fields.empty()) return fail(ParseErrorKind::missing_key, "token " + std::to_string(i) + ": " + fields[0]);
    auto tags = validate_tags(s.tokens[i], profile);
    if (!tags.empty()) return fail(ParseErrorKind::tag_violation, "token " + std::to_string(i) + ": " + tags[0]);
  }
  auto iob = validate_iob(entity_tags(s.tokens));
  if (!iob.empty())
    return fail(ParseErrorKind::tag_violation, "token " + std::to_string(iob[0].index) + ": " + iob[0].message);
  auto remaining = validate_sentence(s, profile);
  if (!remaining.empty()) return fail(ParseErrorKind::offset_mismatch, remaining[0]);
  return s;
}

}  // namespace histanno
