#include "histanno/schema.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "histanno/error.hpp"

namespace histanno {

namespace {

const std::vector<std::string> kUpos = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

const std::vector<std::string> kFtb = {
    "ADJ", "ADJWH", "ADV", "ADVWH", "CC", "CLO", "CLR", "CLS", "CS", "DET",
    "DETWH", "X", "I", "NC", "NPP", "P", "P+D", "P+PRO", "PONCT", "PREF",
    "PRO", "PROREL", "PROWH", "V", "VIMP", "VINF", "VPP", "VPR", "VS"};

const std::vector<std::string> kCtb = {
    "AD", "AS", "BA", "CC", "CD", "CS", "DEC", "DEG", "DER", "DEV", "DT", "ETC",
    "FW", "IJ", "JJ", "LB", "LC", "M", "MSP", "NN", "NR", "NT", "OD", "ON",
    "P", "PN", "PU", "SB", "SP", "VA", "VC", "VE", "VV", "X"};

const std::vector<std::string> kOntoNotesTypes = {
    "CARDINAL", "DATE", "EVENT", "FAC", "GPE", "LANGUAGE", "LAW", "LOC", "MONEY",
    "NORP", "ORDINAL", "ORG", "PERCENT", "PERSON", "PRODUCT", "QUANTITY", "TIME",
    "WORK_OF_ART"};

bool contains(const std::vector<std::string>& v, std::string_view s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

LanguageProfile make_french() {
  LanguageProfile p;
  p.language = Language::french;
  p.version = "1";
  p.upos_inventory = kUpos;
  p.xpos_inventory = kFtb;
  p.requires_lemma = true;
  p.requires_dep = true;
  p.whitespace_script = true;
  p.separators = " ";
  return p;
}

LanguageProfile make_chinese() {
  LanguageProfile p;
  p.language = Language::chinese;
  p.version = "1";
  p.upos_inventory = kUpos;
  p.xpos_inventory = kCtb;
  p.ner_inventory = kOntoNotesTypes;
  p.requires_lemma = false;
  p.requires_dep = false;
  p.whitespace_script = false;
  p.separators = "";
  return p;
}

void require_closed_set(const std::vector<std::string>& v, const char* what) {
  std::set<std::string> seen;
  for (const auto& tag : v) {
    if (tag.empty()) throw ValidationError(std::string("empty tag in ") + what + " inventory");
    if (!seen.insert(tag).second)
      throw ValidationError(std::string("duplicate tag ") + tag + " in " + what + " inventory");
  }
}

}  // namespace

std::string_view to_string(Language lang) {
  return lang == Language::french ? "french" : "chinese";
}

Language parse_language(std::string_view name) {
  if (name == "french") return Language::french;
  if (name == "chinese") return Language::chinese;
  throw ValidationError("unknown language profile: " + std::string(name));
}

char to_char(Iob iob) {
  switch (iob) {
    case Iob::B: return 'B';
    case Iob::I: return 'I';
    case Iob::O: return 'O';
  }
  return 'O';
}

std::optional<Iob> parse_iob(std::string_view s) {
  if (s == "B") return Iob::B;
  if (s == "I") return Iob::I;
  if (s == "O") return Iob::O;
  return std::nullopt;
}

bool LanguageProfile::has_upos(std::string_view tag) const { return contains(upos_inventory, tag); }
bool LanguageProfile::has_xpos(std::string_view tag) const { return contains(xpos_inventory, tag); }
bool LanguageProfile::has_ner_type(std::string_view type) const { return contains(ner_inventory, type); }

const LanguageProfile& builtin_profile(Language lang) {
  static const LanguageProfile french = make_french();
  static const LanguageProfile chinese = make_chinese();
  return lang == Language::french ? french : chinese;
}

std::string profile_to_json(const LanguageProfile& p) {
  nlohmann::ordered_json j;
  j["language"] = to_string(p.language);
  j["version"] = p.version;
  j["upos"] = p.upos_inventory;
  j["xpos"] = p.xpos_inventory;
  j["ner"] = p.ner_inventory;
  j["requires_lemma"] = p.requires_lemma;
  j["requires_dep"] = p.requires_dep;
  j["whitespace_script"] = p.whitespace_script;
  j["separators"] = p.separators;
  return j.dump(2) + "\n";
}

LanguageProfile profile_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    LanguageProfile p;
    p.language = parse_language(j.at("language").get<std::string>());
    p.version = j.at("version").get<std::string>();
    p.upos_inventory = j.at("upos").get<std::vector<std::string>>();
    p.xpos_inventory = j.at("xpos").get<std::vector<std::string>>();
    p.ner_inventory = j.value("ner", std::vector<std::string>{});
    p.requires_lemma = j.at("requires_lemma").get<bool>();
    p.requires_dep = j.value("requires_dep", false);
    p.whitespace_script = j.at("whitespace_script").get<bool>();
    p.separators = j.value("separators", std::string(" "));
    require_closed_set(p.upos_inventory, "upos");
    require_closed_set(p.xpos_inventory, "xpos");
    require_closed_set(p.ner_inventory, "ner");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad profile file: ") + e.what());
  }
}

LanguageProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profile " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return profile_from_json(ss.str());
}

}  // namespace histanno
