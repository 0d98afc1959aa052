#include "histanno/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "histanno/embedded_data.hpp"
#include "histanno/error.hpp"
#include "histanno/rng.hpp"
#include "histanno/sentence_io.hpp"
#include "histanno/utf8.hpp"

namespace histanno {

namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool surfaces_overlap(const FixRule& a, const FixRule& b) {
  if (!a.case_insensitive && !b.case_insensitive) return a.match_text == b.match_text;
  return utf8::fold_case(a.match_text) == utf8::fold_case(b.match_text);
}

// Could a token rewritten by `a` satisfy `b`'s preconditions? Unknown output
// values count as a possible match.
bool retriggers(const FixRule& a, const FixRule& b) {
  if (!surfaces_overlap(a, b)) return false;
  auto upos_out = a.set_upos ? a.set_upos : a.match_upos;
  auto xpos_out = a.set_xpos ? a.set_xpos : a.match_xpos;
  if (b.match_upos && upos_out && *upos_out != *b.match_upos) return false;
  if (b.match_xpos && xpos_out && *xpos_out != *b.match_xpos) return false;
  return true;
}

[[noreturn]] void rule_error(std::size_t line, const std::string& msg) {
  throw ValidationError("fix rules line " + std::to_string(line) + ": " + msg);
}

}  // namespace

bool FixRule::matches(const TokenAnnotation& t) const {
  if (case_insensitive) {
    if (utf8::fold_case(t.token.text) != utf8::fold_case(match_text)) return false;
  } else if (t.token.text != match_text) {
    return false;
  }
  if (match_upos && t.upos != *match_upos) return false;
  if (match_xpos && t.xpos != *match_xpos) return false;
  return true;
}

std::vector<FixRule> parse_fix_rules(std::string_view text, const LanguageProfile& profile) {
  std::vector<FixRule> rules;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto arrow = line.find("->");
    if (arrow == std::string::npos) rule_error(line_no, "missing '->'");
    auto lhs = split_ws(std::string_view(line).substr(0, arrow));
    auto rhs = split_ws(std::string_view(line).substr(arrow + 2));
    if (lhs.empty()) rule_error(line_no, "missing surface form");

    FixRule r;
    r.line = line_no;
    r.match_text = lhs[0];
    for (std::size_t i = 1; i < lhs.size(); ++i) {
      const auto& w = lhs[i];
      if (w == "icase") {
        r.case_insensitive = true;
      } else if (w.rfind("upos=", 0) == 0) {
        r.match_upos = w.substr(5);
      } else if (w.rfind("xpos=", 0) == 0) {
        r.match_xpos = w.substr(5);
      } else {
        rule_error(line_no, "unknown precondition '" + w + "'");
      }
    }
    for (const auto& w : rhs) {
      if (w.rfind("upos=", 0) == 0) {
        r.set_upos = w.substr(5);
      } else if (w.rfind("xpos=", 0) == 0) {
        r.set_xpos = w.substr(5);
      } else if (w.rfind("lemma=", 0) == 0) {
        r.set_lemma = w.substr(6);
      } else {
        rule_error(line_no, "unknown replacement '" + w + "'");
      }
    }
    if (!r.set_upos && !r.set_xpos && !r.set_lemma) rule_error(line_no, "rule has no replacement");
    for (const auto* tag : {&r.match_upos, &r.set_upos})
      if (*tag && !profile.has_upos(**tag)) rule_error(line_no, "unknown upos " + **tag);
    for (const auto* tag : {&r.match_xpos, &r.set_xpos})
      if (*tag && !profile.has_xpos(**tag)) rule_error(line_no, "unknown xpos " + **tag);
    if (r.set_lemma && !profile.requires_lemma)
      rule_error(line_no, "profile " + std::string(to_string(profile.language)) + " has no lemma layer");
    if (r.set_lemma && r.set_lemma->empty()) rule_error(line_no, "empty lemma");
    rules.push_back(std::move(r));
  }

  for (std::size_t i = 0; i < rules.size(); ++i)
    for (std::size_t j = 0; j < rules.size(); ++j)
      if (i != j && retriggers(rules[i], rules[j]))
        rule_error(rules[i].line, "output can re-trigger the rule on line " + std::to_string(rules[j].line));
  return rules;
}

std::vector<FixRule> load_fix_rules(const std::filesystem::path& path, const LanguageProfile& profile) {
  return parse_fix_rules(read_file(path), profile);
}

std::vector<FixChange> apply_fix_rules(std::vector<AnnotatedSentence>& sentences, const std::vector<FixRule>& rules) {
  std::vector<FixChange> log;
  for (auto& s : sentences) {
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      auto& t = s.tokens[k];
      auto rule = std::find_if(rules.begin(), rules.end(), [&](const FixRule& r) { return r.matches(t); });
      if (rule == rules.end()) continue;
      auto set = [&](const char* field, std::string& slot, const std::string& value) {
        if (slot == value) return;
        log.push_back({s.id, k, field, slot, value});
        slot = value;
      };
      if (rule->set_upos) set("upos", t.upos, *rule->set_upos);
      if (rule->set_xpos) set("xpos", t.xpos, *rule->set_xpos);
      if (rule->set_lemma && t.lemma != rule->set_lemma) {
        log.push_back({s.id, k, "lemma", t.lemma.value_or(""), *rule->set_lemma});
        t.lemma = rule->set_lemma;
      }
    }
  }
  return log;
}

std::string fix_change_to_line(const FixChange& c) {
  nlohmann::ordered_json j;
  j["sentence_id"] = c.sentence_id;
  j["token"] = c.token;
  j["field"] = c.field;
  j["old"] = c.before;
  j["new"] = c.after;
  return j.dump();
}

// ---- mapping --------------------------------------------------------------

MappingTable MappingTable::parse(std::string_view tsv, const LanguageProfile& profile) {
  MappingTable m;
  m.language_ = profile.language;
  std::istringstream in{std::string(tsv)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ValidationError("mapping line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# version ", 0) == 0) m.version_ = trim(line.substr(10));
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected XPOS<TAB>UPOS[,UPOS]");
    auto xpos = trim(line.substr(0, tab));
    if (!profile.has_xpos(xpos)) fail("unknown xpos " + xpos);
    if (m.entries_.count(xpos)) fail("duplicate xpos " + xpos);
    std::set<std::string> permitted;
    std::istringstream list(trim(line.substr(tab + 1)));
    std::string upos;
    while (std::getline(list, upos, ',')) {
      upos = trim(upos);
      if (!profile.has_upos(upos)) fail("unknown upos " + upos);
      permitted.insert(upos);
    }
    if (permitted.empty()) fail("empty upos set for " + xpos);
    m.entries_.emplace(xpos, std::move(permitted));
  }
  for (const auto& x : profile.xpos_inventory)
    if (!m.entries_.count(x)) throw ValidationError("mapping is not total: no entry for xpos " + x);
  return m;
}

MappingTable MappingTable::load(const std::filesystem::path& path, const LanguageProfile& profile) {
  return parse(read_file(path), profile);
}

const MappingTable& MappingTable::builtin(Language lang) {
  static const MappingTable fr = parse(embedded::kFrenchMapping, builtin_profile(Language::french));
  static const MappingTable zh = parse(embedded::kChineseMapping, builtin_profile(Language::chinese));
  return lang == Language::french ? fr : zh;
}

const std::set<std::string>& MappingTable::permitted(const std::string& xpos) const {
  auto it = entries_.find(xpos);
  if (it == entries_.end()) throw ValidationError("no mapping entry for xpos " + xpos);
  return it->second;
}

std::vector<UdFlag> check_ud_consistency(AnnotatedSentence& sentence, const MappingTable& mapping,
                                         bool auto_correct) {
  std::vector<UdFlag> flags;
  for (std::size_t k = 0; k < sentence.tokens.size(); ++k) {
    auto& t = sentence.tokens[k];
    const auto& ok = mapping.permitted(t.xpos);
    if (ok.count(t.upos)) continue;
    UdFlag f{sentence.id, k, t.xpos, t.upos, std::nullopt};
    if (auto_correct && ok.size() == 1) {
      t.upos = *ok.begin();
      f.corrected_to = t.upos;
    }
    flags.push_back(std::move(f));
  }
  return flags;
}

// ---- augmentation ---------------------------------------------------------

bool has_rare_tag(const AnnotatedSentence& s, const AugmentationSpec& spec) {
  return std::any_of(s.tokens.begin(), s.tokens.end(), [&](const TokenAnnotation& t) {
    return spec.rare_upos.count(t.upos) || spec.rare_xpos.count(t.xpos);
  });
}

std::vector<AnnotatedSentence> augment_rare(const std::vector<AnnotatedSentence>& train,
                                            const AugmentationSpec& spec, AugmentationReport* report) {
  if (spec.factor < 1) throw ValidationError("augmentation factor must be at least 1");
  AugmentationReport rep;
  rep.input = train.size();
  std::vector<AnnotatedSentence> out;
  out.reserve(train.size());
  for (const auto& s : train) {
    out.push_back(s);
    if (!has_rare_tag(s, spec)) continue;
    ++rep.matched;
    for (int k = 1; k < spec.factor; ++k) {
      auto copy = s;
      copy.provenance.augmented_copy = k;
      out.push_back(std::move(copy));
      ++rep.copies;
    }
  }
  rep.output = out.size();
  if (report) *report = rep;
  return out;
}

// ---- split ----------------------------------------------------------------

int period_start(std::string_view label) {
  auto dash = label.find('-', 1);
  int value = 0;
  auto end = label.data() + (dash == std::string_view::npos ? label.size() : dash);
  auto [ptr, ec] = std::from_chars(label.data(), end, value);
  if (label.empty() || ec != std::errc() || ptr != end) throw ValidationError("bad period label: " + std::string(label));
  return value;
}

void validate_split_spec(const SplitSpec& spec) {
  if (!(spec.train > 0 && spec.dev > 0 && spec.test > 0)) throw ValidationError("split ratios must be positive");
  if (std::abs(spec.train + spec.dev + spec.test - 1.0) > 1e-6) throw ValidationError("split ratios must sum to 1");
}

SplitResult stratified_split(const std::vector<AnnotatedSentence>& sentences, const SplitSpec& spec) {
  validate_split_spec(spec);
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& p = sentences[i].period;
    if (p.empty()) throw ValidationError("sentence " + sentences[i].id + " has no period label");
    strata[{period_start(p), p}].push_back(i);
  }
  SplitResult out;
  for (auto& [key, members] : strata) {
    const auto& label = key.second;
    const std::size_t n = members.size();
    auto& counts = out.per_stratum[label];
    if (n < 3) {
      out.warnings.push_back("stratum " + label + " has only " + std::to_string(n) +
                             " sentences; all assigned to train");
      for (auto i : members) out.train.push_back(sentences[i]);
      counts.train = n;
      continue;
    }
    seeded_shuffle(members, derive_seed(spec.seed, "split:" + label));
    // The epsilon keeps e.g. 30 * 0.1 from flooring to 2.
    const auto n_dev = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.dev + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test + 1e-9));
    for (std::size_t k = 0; k < n; ++k) {
      const auto& s = sentences[members[k]];
      if (k < n_dev) {
        out.dev.push_back(s);
      } else if (k < n_dev + n_test) {
        out.test.push_back(s);
      } else {
        out.train.push_back(s);
      }
    }
    counts = {n - n_dev - n_test, n_dev, n_test};
  }
  return out;
}

}  // namespace histanno
