#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace histanno {

enum class Language { french, chinese };

std::string_view to_string(Language lang);
Language parse_language(std::string_view name);  // throws ValidationError

enum class Iob { B, I, O };

char to_char(Iob iob);
std::optional<Iob> parse_iob(std::string_view s);

// A segmentation unit. Offsets count Unicode code points, end exclusive.
struct Token {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  bool trailing_space = false;

  bool operator==(const Token&) const = default;
};

struct TokenAnnotation {
  Token token;
  std::string upos;
  std::string xpos;
  std::optional<std::string> lemma;
  std::optional<std::string> dep;
  Iob ent_iob = Iob::O;
  std::string ent_type;

  bool operator==(const TokenAnnotation&) const = default;
};

struct Provenance {
  std::string model_id;
  std::vector<double> temperatures;
  std::string timestamp;
  // 0 for an original sentence, k for the k-th augmentation copy.
  int augmented_copy = 0;

  bool operator==(const Provenance&) const = default;
};

struct AnnotatedSentence {
  std::string id;
  std::string text;
  Language language = Language::french;
  std::string period;
  std::vector<TokenAnnotation> tokens;
  Provenance provenance;

  bool operator==(const AnnotatedSentence&) const = default;
};

// Closed vocabularies and field requirements for one language.
struct LanguageProfile {
  Language language = Language::french;
  std::string version;
  std::vector<std::string> upos_inventory;
  std::vector<std::string> xpos_inventory;
  // Empty for an untyped (letter-only) entity layer.
  std::vector<std::string> ner_inventory;
  bool requires_lemma = false;
  bool requires_dep = false;
  bool whitespace_script = false;
  // Characters accepted between tokens of a whitespace script.
  std::string separators = " ";

  bool has_upos(std::string_view tag) const;
  bool has_xpos(std::string_view tag) const;
  bool has_ner_type(std::string_view type) const;
  bool typed_entities() const { return !ner_inventory.empty(); }
};

const LanguageProfile& builtin_profile(Language lang);

// Profiles also ship as JSON data files so new ones can be added without a rebuild.
LanguageProfile load_profile(const std::filesystem::path& path);
std::string profile_to_json(const LanguageProfile& profile);
LanguageProfile profile_from_json(std::string_view json);

}  // namespace histanno
