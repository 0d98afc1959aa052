#include "histanno/mock_provider.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "histanno/rng.hpp"
#include "histanno/utf8.hpp"
#include "histanno/validate.hpp"

namespace histanno {

namespace {

struct MockToken {
  std::string text, upos, xpos, lemma, dep;
  char iob = 'O';
  std::string type;
};

struct FrenchEntry {
  const char* upos;
  const char* xpos;
  const char* lemma;
};

const std::unordered_map<std::string, FrenchEntry>& french_lexicon() {
  static const std::unordered_map<std::string, FrenchEntry> lex = {
      {"le", {"DET", "DET", "le"}},        {"la", {"DET", "DET", "le"}},
      {"les", {"DET", "DET", "le"}},       {"l'", {"DET", "DET", "le"}},
      {"un", {"DET", "DET", "un"}},        {"une", {"DET", "DET", "un"}},
      {"ce", {"DET", "DET", "ce"}},        {"son", {"DET", "DET", "son"}},
      {"sa", {"DET", "DET", "son"}},       {"mon", {"DET", "DET", "mon"}},
      {"de", {"ADP", "P", "de"}},          {"d'", {"ADP", "P", "de"}},
      {"à", {"ADP", "P", "à"}},            {"en", {"ADP", "P", "en"}},
      {"dans", {"ADP", "P", "dans"}},      {"pour", {"ADP", "P", "pour"}},
      {"avec", {"ADP", "P", "avec"}},      {"du", {"ADP", "P+D", "de"}},
      {"au", {"ADP", "P+D", "à"}},         {"aux", {"ADP", "P+D", "à"}},
      {"des", {"ADP", "P+D", "de"}},       {"et", {"CCONJ", "CC", "et"}},
      {"mais", {"CCONJ", "CC", "mais"}},   {"ou", {"CCONJ", "CC", "ou"}},
      {"que", {"SCONJ", "CS", "que"}},     {"qu'", {"SCONJ", "CS", "que"}},
      {"si", {"SCONJ", "CS", "si"}},       {"quand", {"SCONJ", "CS", "quand"}},
      {"qui", {"PRON", "PROREL", "qui"}},  {"dont", {"PRON", "PROREL", "dont"}},
      {"il", {"PRON", "CLS", "il"}},       {"elle", {"PRON", "CLS", "elle"}},
      {"je", {"PRON", "CLS", "je"}},       {"j'", {"PRON", "CLS", "je"}},
      {"nous", {"PRON", "CLS", "nous"}},   {"vous", {"PRON", "CLS", "vous"}},
      {"ils", {"PRON", "CLS", "il"}},      {"on", {"PRON", "CLS", "on"}},
      {"se", {"PRON", "CLR", "se"}},       {"s'", {"PRON", "CLR", "se"}},
      {"me", {"PRON", "CLO", "me"}},       {"lui", {"PRON", "PRO", "lui"}},
      {"moy", {"PRON", "PRO", "moi"}},     {"moi", {"PRON", "PRO", "moi"}},
      {"ne", {"ADV", "ADV", "ne"}},        {"n'", {"ADV", "ADV", "ne"}},
      {"pas", {"PART", "ADV", "pas"}},     {"point", {"ADV", "ADV", "point"}},
      {"bien", {"ADV", "ADV", "bien"}},    {"fort", {"ADV", "ADV", "fort"}},
      {"tres", {"ADV", "ADV", "très"}},    {"très", {"ADV", "ADV", "très"}},
      {"est", {"AUX", "V", "être"}},       {"sont", {"AUX", "V", "être"}},
      {"estoit", {"AUX", "V", "être"}},    {"était", {"AUX", "V", "être"}},
      {"fut", {"AUX", "V", "être"}},       {"a", {"AUX", "V", "avoir"}},
      {"ont", {"AUX", "V", "avoir"}},      {"avoit", {"AUX", "V", "avoir"}},
      {"parle", {"VERB", "V", "parler"}},  {"aime", {"VERB", "V", "aimer"}},
      {"voit", {"VERB", "V", "voir"}},     {"vient", {"VERB", "V", "venir"}},
      {"dit", {"VERB", "VPP", "dire"}},    {"passé", {"VERB", "VPP", "passer"}},
      {"faict", {"VERB", "VPP", "faire"}}, {"fait", {"VERB", "VPP", "faire"}},
      {"venu", {"VERB", "VPP", "venir"}},  {"parlant", {"VERB", "VPR", "parler"}},
      {"soit", {"AUX", "VS", "être"}},     {"allez", {"VERB", "VIMP", "aller"}},
      {"venez", {"VERB", "VIMP", "venir"}}, {"écoutez", {"VERB", "VIMP", "écouter"}},
      {"roi", {"NOUN", "NC", "roi"}},      {"roy", {"NOUN", "NC", "roi"}},
      {"reine", {"NOUN", "NC", "reine"}},  {"peuple", {"NOUN", "NC", "peuple"}},
      {"ville", {"NOUN", "NC", "ville"}},  {"cœur", {"NOUN", "NC", "cœur"}},
      {"temps", {"NOUN", "NC", "temps"}},  {"homme", {"NOUN", "NC", "homme"}},
      {"femme", {"NOUN", "NC", "femme"}},  {"guerre", {"NOUN", "NC", "guerre"}},
      {"amour", {"NOUN", "NC", "amour"}},  {"grand", {"ADJ", "ADJ", "grand"}},
      {"belle", {"ADJ", "ADJ", "beau"}},   {"vieux", {"ADJ", "ADJ", "vieux"}},
      {"hélas", {"INTJ", "I", "hélas"}},   {"ô", {"INTJ", "I", "ô"}},
      {"ah", {"INTJ", "I", "ah"}},         {"quel", {"ADJ", "ADJWH", "quel"}},
      {"où", {"ADV", "ADVWH", "où"}},
  };
  return lex;
}

const std::vector<std::string> kLeadingPunct = {"«", "(", "\"", "“"};
const std::vector<std::string> kTrailingPunct = {".", ",", ";", ":", "!", "?", "»", ")", "\"", "”", "…"};

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

std::vector<std::string> french_tokenize(const std::string& sentence) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= sentence.size()) {
    auto end = sentence.find(' ', start);
    if (end == std::string::npos) end = sentence.size();
    std::string chunk = sentence.substr(start, end - start);
    start = end + 1;
    if (chunk.empty()) continue;
    std::vector<std::string> tail;
    bool peeled = true;
    while (peeled && !chunk.empty()) {
      peeled = false;
      for (const auto& p : kLeadingPunct)
        if (starts_with(chunk, p) && chunk.size() > p.size()) {
          out.push_back(p);
          chunk.erase(0, p.size());
          peeled = true;
        }
      for (const auto& p : kTrailingPunct)
        if (ends_with(chunk, p) && chunk.size() > p.size()) {
          tail.insert(tail.begin(), p);
          chunk.erase(chunk.size() - p.size());
          peeled = true;
        }
    }
    // Elision: l'homme -> l' homme
    for (std::string_view apo : {"'", "’"}) {
      auto pos = chunk.find(apo);
      if (pos != std::string::npos && pos > 0 && pos <= 5 && pos + apo.size() < chunk.size()) {
        out.push_back(chunk.substr(0, pos + apo.size()));
        chunk.erase(0, pos + apo.size());
        break;
      }
    }
    out.push_back(chunk);
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

bool is_punct(const std::string& t) {
  return std::find(kTrailingPunct.begin(), kTrailingPunct.end(), t) != kTrailingPunct.end() ||
         std::find(kLeadingPunct.begin(), kLeadingPunct.end(), t) != kLeadingPunct.end();
}

std::vector<MockToken> french_annotate(const std::string& sentence) {
  std::vector<MockToken> out;
  auto pieces = french_tokenize(sentence);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& t = pieces[i];
    MockToken m;
    m.text = t;
    auto folded = utf8::fold_case(t);
    if (std::string(folded).back() == '\'' || ends_with(folded, "’")) {
      folded = folded.substr(0, folded.size() - (folded.back() == '\'' ? 1 : 3)) + "'";
    }
    if (is_punct(t)) {
      m.upos = "PUNCT";
      m.xpos = "PONCT";
      m.lemma = t;
      m.dep = "punct";
    } else if (auto it = french_lexicon().find(folded); it != french_lexicon().end()) {
      m.upos = it->second.upos;
      m.xpos = it->second.xpos;
      m.lemma = it->second.lemma;
      m.dep = "dep";
    } else if (i > 0 && folded != t) {
      m.upos = "PROPN";
      m.xpos = "NPP";
      m.lemma = t;
      m.dep = "dep";
      m.iob = 'B';
    } else if (ends_with(folded, "er") || ends_with(folded, "ir")) {
      m.upos = "VERB";
      m.xpos = "VINF";
      m.lemma = folded;
      m.dep = "dep";
    } else {
      m.upos = "NOUN";
      m.xpos = "NC";
      m.lemma = folded;
      m.dep = "dep";
    }
    out.push_back(std::move(m));
  }
  return out;
}

struct ChineseEntry {
  const char* upos;
  const char* xpos;
  const char* type;
};

const std::unordered_map<std::string, ChineseEntry>& chinese_lexicon() {
  static const std::unordered_map<std::string, ChineseEntry> lex = {
      {"他", {"PRON", "PN", ""}},      {"她", {"PRON", "PN", ""}},      {"我", {"PRON", "PN", ""}},
      {"我們", {"PRON", "PN", ""}},    {"此", {"PRON", "PN", ""}},      {"這", {"PRON", "PN", ""}},
      {"去", {"VERB", "VV", ""}},      {"來", {"VERB", "VV", ""}},      {"到", {"VERB", "VV", ""}},
      {"說", {"VERB", "VV", ""}},      {"讀", {"VERB", "VV", ""}},      {"看見", {"VERB", "VV", ""}},
      {"是", {"VERB", "VC", ""}},      {"爲", {"VERB", "VC", ""}},      {"有", {"VERB", "VE", ""}},
      {"在", {"ADP", "P", ""}},        {"的", {"PART", "DEG", ""}},     {"之", {"PART", "DEG", ""}},
      {"了", {"AUX", "AS", ""}},       {"很", {"ADV", "AD", ""}},       {"不", {"ADV", "AD", ""}},
      {"也", {"ADV", "AD", ""}},       {"難", {"ADJ", "VA", ""}},       {"和", {"CCONJ", "CC", ""}},
      {"上海", {"PROPN", "NR", "GPE"}}, {"北京", {"PROPN", "NR", "GPE"}}, {"中國", {"PROPN", "NR", "GPE"}},
      {"日本", {"PROPN", "NR", "GPE"}}, {"國民黨", {"PROPN", "NR", "ORG"}}, {"孫中山", {"PROPN", "NR", "PERSON"}},
      {"魯迅", {"PROPN", "NR", "PERSON"}}, {"回教", {"PROPN", "NR", "NORP"}}, {"申報", {"PROPN", "NR", "ORG"}},
      {"點鐘", {"NOUN", "NN", ""}},    {"點", {"NOUN", "NN", ""}},      {"群", {"NOUN", "M", ""}},
      {"人", {"NOUN", "NN", ""}},      {"學生", {"NOUN", "NN", ""}},    {"報", {"NOUN", "NN", ""}},
      {"書", {"NOUN", "NN", ""}},      {"政治", {"NOUN", "NN", ""}},    {"國家", {"NOUN", "NN", ""}},
      {"革命", {"NOUN", "NN", ""}},    {"時候", {"NOUN", "NN", ""}},    {"第一", {"NUM", "OD", "ORDINAL"}},
      {"上", {"ADP", "LC", ""}},       {"中", {"ADP", "LC", ""}},
  };
  return lex;
}

const std::string kChinesePunct = "。，、？！「」《》；：（）";
const std::string kChineseNumerals = "一二三四五六七八九十百千兩";

std::vector<MockToken> chinese_annotate(const std::string& sentence) {
  auto cps = utf8::code_points(sentence);
  std::vector<MockToken> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    std::size_t len = std::min<std::size_t>(4, cps.size() - i);
    const ChineseEntry* entry = nullptr;
    std::string word;
    for (; len >= 2; --len) {
      word.clear();
      for (std::size_t k = 0; k < len; ++k) word += cps[i + k];
      if (auto it = chinese_lexicon().find(word); it != chinese_lexicon().end()) {
        entry = &it->second;
        break;
      }
    }
    if (!entry) {
      len = 1;
      word = cps[i];
      if (auto it = chinese_lexicon().find(word); it != chinese_lexicon().end()) entry = &it->second;
    }
    MockToken m;
    m.text = word;
    if (entry) {
      m.upos = entry->upos;
      m.xpos = entry->xpos;
      if (*entry->type) {
        m.iob = 'B';
        m.type = entry->type;
      }
    } else if (kChinesePunct.find(word) != std::string::npos || (word.size() == 1 && std::ispunct(static_cast<unsigned char>(word[0])))) {
      m.upos = "PUNCT";
      m.xpos = "PU";
    } else if (kChineseNumerals.find(word) != std::string::npos ||
               (word.size() == 1 && std::isdigit(static_cast<unsigned char>(word[0])))) {
      m.upos = "NUM";
      m.xpos = "CD";
    } else {
      m.upos = "NOUN";
      m.xpos = "NN";
    }
    out.push_back(std::move(m));
    i += len;
  }
  // Numeral + 點鐘/點 is a TIME entity.
  for (std::size_t k = 0; k + 1 < out.size(); ++k) {
    if (out[k].xpos == "CD" && out[k].iob == 'O' && (out[k + 1].text == "點鐘" || out[k + 1].text == "點")) {
      out[k].iob = 'B';
      out[k].type = "TIME";
      out[k + 1].iob = 'I';
      out[k + 1].type = "TIME";
    }
  }
  return out;
}

void clear_entity_run(std::vector<MockToken>& toks, std::size_t k) {
  std::size_t start = k;
  while (start > 0 && toks[start].iob == 'I') --start;
  std::size_t end = start + 1;
  while (end < toks.size() && toks[end].iob == 'I') ++end;
  for (std::size_t i = start; i < end; ++i) {
    toks[i].iob = 'O';
    toks[i].type.clear();
  }
}

void perturb(std::vector<MockToken>& toks, const Perturbation& p, Language lang) {
  if (toks.empty()) return;
  std::size_t k = p.token % toks.size();
  std::string field = p.field;
  if (field == "text" && (lang != Language::chinese || toks.size() < 2)) field = "upos";
  if ((field == "lemma" || field == "dep") && lang == Language::chinese) field = "upos";
  auto& t = toks[k];
  if (field == "upos") {
    t.upos = t.upos == "X" ? "NOUN" : "X";
  } else if (field == "xpos") {
    t.xpos = t.xpos == "X" ? (lang == Language::french ? "NC" : "NN") : "X";
  } else if (field == "lemma") {
    t.lemma += "_alt";
  } else if (field == "dep") {
    t.dep += "_alt";
  } else if (field == "ent") {
    if (t.iob == 'O') {
      t.iob = 'B';
      if (lang == Language::chinese) t.type = "ORG";
      // A following I would now continue a different entity; start it fresh.
      if (k + 1 < toks.size() && toks[k + 1].iob == 'I') clear_entity_run(toks, k + 1);
    } else {
      clear_entity_run(toks, k);
    }
  } else if (field == "text") {
    std::size_t j = k + 1 < toks.size() ? k : k - 1;
    toks[j].text += toks[j + 1].text;
    toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(j + 1));
    if (j + 1 < toks.size() && toks[j + 1].iob == 'I' && (toks[j].iob == 'O' || toks[j].type != toks[j + 1].type))
      clear_entity_run(toks, j + 1);
  }
}

std::string serialize(const std::vector<MockToken>& toks, const std::string& sentence, Language lang) {
  nlohmann::ordered_json root;
  if (lang == Language::chinese) root["text"] = sentence;
  auto& arr = root["tokens"] = nlohmann::ordered_json::array();
  for (const auto& t : toks) {
    nlohmann::ordered_json j;
    j["text"] = t.text;
    j["pos"] = t.upos;
    j["tag"] = t.xpos;
    if (lang == Language::french) {
      j["lemma"] = t.lemma;
      j["dep"] = t.dep;
      j["ent"] = std::string(1, t.iob);
    } else {
      j["ent_iob_"] = std::string(1, t.iob);
      j["ent_type_"] = t.type;
    }
    arr.push_back(std::move(j));
  }
  return root.dump();
}

std::vector<MockToken> annotate(const std::string& sentence, Language lang) {
  return lang == Language::french ? french_annotate(sentence) : chinese_annotate(sentence);
}

// A B in the French letter-only layer that continues a capitalized run becomes I.
void link_french_names(std::vector<MockToken>& toks) {
  for (std::size_t k = 1; k < toks.size(); ++k)
    if (toks[k].iob == 'B' && toks[k - 1].iob != 'O' && toks[k].upos == "PROPN" && toks[k - 1].upos == "PROPN")
      toks[k].iob = 'I';
}

}  // namespace

void plan_disagreements(MockConfig& config, const std::vector<CorpusRecord>& records, double rate,
                        std::uint64_t seed, std::vector<double> temperatures) {
  if (rate < 0.0 || rate > 1.0) throw ValidationError("disagreement rate must lie in [0, 1]");
  if (temperatures.empty()) throw ValidationError("need at least one temperature");
  std::map<std::string, std::vector<std::string>> by_period;
  for (const auto& r : records) by_period[r.period].push_back(r.id);
  const std::vector<std::string> fields = config.language == Language::french
                                              ? std::vector<std::string>{"upos", "xpos", "lemma", "dep"}
                                              : std::vector<std::string>{"text", "upos", "xpos", "ent"};
  const double target = temperatures.size() > 1 ? temperatures[1] : temperatures[0];
  for (auto& [period, ids] : by_period) {
    auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(ids.size())));
    seeded_shuffle(ids, derive_seed(seed, "mock-disagreement:" + period));
    for (std::size_t i = 0; i < count; ++i) {
      auto h = fnv1a64(ids[i]);
      config.perturbations[ids[i]].push_back({target, static_cast<std::size_t>(h % 7), fields[(h >> 8) % fields.size()]});
    }
  }
}

MockProvider::MockProvider(MockConfig config) : config_(std::move(config)) {
  caps_.model_id = config_.model_id;
  caps_.supports_temperature = true;
}

std::string MockProvider::annotate_json(const std::string& sentence) const {
  auto toks = annotate(sentence, config_.language);
  if (config_.language == Language::french) link_french_names(toks);
  return serialize(toks, sentence, config_.language);
}

std::string MockProvider::complete(const AnnotationRequest& request) {
  struct InFlight {
    MockProvider& p;
    explicit InFlight(MockProvider& self) : p(self) {
      auto now = ++p.in_flight_;
      auto seen = p.max_in_flight_.load();
      while (now > seen && !p.max_in_flight_.compare_exchange_weak(seen, now)) {
      }
    }
    ~InFlight() { --p.in_flight_; }
  } guard(*this);
  ++calls_;
  if (config_.latency.count() > 0) std::this_thread::sleep_for(config_.latency);

  if (auto it = config_.transport_failures.find(request.record_id);
      it != config_.transport_failures.end() && request.attempt < it->second)
    throw ProviderError("mock transport failure");
  if (auto it = config_.malformed_attempts.find(request.record_id);
      it != config_.malformed_attempts.end() && request.attempt < it->second)
    return "{\"tokens\": [{\"text\": ";

  auto toks = annotate(request.sentence, config_.language);
  if (config_.language == Language::french) link_french_names(toks);
  if (auto it = config_.perturbations.find(request.record_id); it != config_.perturbations.end()) {
    for (const auto& p : it->second)
      if (std::abs(p.temperature - request.temperature) < 1e-9) perturb(toks, p, config_.language);
  }
  auto body = serialize(toks, request.sentence, config_.language);
  if (config_.wrap_in_prose) return "Here is the JSON: " + body + "\nLet me know if you need anything else.";
  return body;
}

}  // namespace histanno
