#include "histanno/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "histanno/conllu.hpp"
#include "histanno/dataset.hpp"
#include "histanno/error.hpp"
#include "histanno/hash.hpp"
#include "histanno/utf8.hpp"
#include "histanno/validate.hpp"

namespace histanno {

namespace {

std::set<EntitySpan> decode_tags(const std::vector<EntityTag>& tags, const std::vector<TokenAnnotation>& tokens,
                                 const std::string& id) {
  auto violations = validate_iob(tags);
  if (!violations.empty())
    throw ValidationError("sentence " + id + ": token " + std::to_string(violations[0].index) + ": " +
                          violations[0].message);
  std::set<EntitySpan> out;
  std::optional<std::size_t> start;
  std::size_t end = 0;
  std::string type;
  auto close = [&] {
    if (start) out.emplace(*start, end, type);
    start.reset();
  };
  for (std::size_t k = 0; k < tags.size(); ++k) {
    if (tags[k].iob == Iob::O) {
      close();
      continue;
    }
    if (tags[k].iob == Iob::B) {
      close();
      start = tokens[k].token.char_start;
      type = tags[k].type;
    }
    end = tokens[k].token.char_end;
  }
  close();
  return out;
}

std::size_t count_intersection(const std::set<EntitySpan>& a, const std::set<EntitySpan>& b) {
  std::size_t n = 0;
  for (const auto& e : a) n += b.count(e);
  return n;
}

double pct(std::size_t num, std::size_t den) { return 100.0 * static_cast<double>(num) / static_cast<double>(den); }

template <class T>
std::optional<T> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

nlohmann::ordered_json metrics_to_json(const EvalMetrics& m) {
  nlohmann::ordered_json j;
  j["token_precision"] = m.token_precision;
  j["token_recall"] = m.token_recall;
  j["token_f1"] = m.token_f1;
  j["pos_score"] = m.pos_score;
  j["pos_norm"] = m.pos_norm ? nlohmann::ordered_json(*m.pos_norm) : nlohmann::ordered_json();
  j["lemma_accuracy"] = m.lemma_accuracy ? nlohmann::ordered_json(*m.lemma_accuracy) : nlohmann::ordered_json();
  j["ner_f1"] = m.ner_f1 ? nlohmann::ordered_json(*m.ner_f1) : nlohmann::ordered_json();
  j["ner_norm"] = m.ner_norm ? nlohmann::ordered_json(*m.ner_norm) : nlohmann::ordered_json();
  const auto& c = m.counts;
  j["counts"] = {{"sentences", c.sentences},         {"gold_tokens", c.gold_tokens},
                 {"pred_tokens", c.pred_tokens},     {"matched", c.matched},
                 {"pos_correct", c.pos_correct},     {"lemma_correct", c.lemma_correct},
                 {"gold_entities", c.gold_entities}, {"pred_entities", c.pred_entities},
                 {"entities_correct", c.entities_correct}, {"ner_tokens_correct", c.ner_tokens_correct}};
  return j;
}

EvalMetrics metrics_from_json(const nlohmann::json& j) {
  EvalMetrics m;
  m.token_precision = j.at("token_precision").get<double>();
  m.token_recall = j.at("token_recall").get<double>();
  m.token_f1 = j.at("token_f1").get<double>();
  m.pos_score = j.at("pos_score").get<double>();
  m.pos_norm = opt_from<double>(j, "pos_norm");
  m.lemma_accuracy = opt_from<double>(j, "lemma_accuracy");
  m.ner_f1 = opt_from<double>(j, "ner_f1");
  m.ner_norm = opt_from<double>(j, "ner_norm");
  if (j.contains("counts")) {
    const auto& c = j["counts"];
    auto get = [&](const char* k) { return c.value(k, std::size_t{0}); };
    m.counts = {get("sentences"),     get("gold_tokens"),   get("pred_tokens"),   get("matched"),
                get("pos_correct"),   get("lemma_correct"), get("gold_entities"), get("pred_entities"),
                get("entities_correct"), get("ner_tokens_correct")};
  }
  return m;
}

std::string pad(const std::string& s, std::size_t width) {
  auto n = utf8::length(s);
  return n >= width ? s : s + std::string(width - n, ' ');
}

std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = utf8::length(header[c]);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], utf8::length(r[c]));
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += c + 1 == cells.size() ? cells[c] : pad(cells[c], width[c]) + "  ";
    }
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out += std::string(total - 2, '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::vector<std::string> chronological(std::set<std::string> periods) {
  std::vector<std::string> v(periods.begin(), periods.end());
  std::stable_sort(v.begin(), v.end(),
                   [](const std::string& a, const std::string& b) { return period_start(a) < period_start(b); });
  return v;
}

const EvalMetrics* find_stratum(const EvalReport& r, const std::string& period) {
  for (const auto& [p, m] : r.per_stratum)
    if (p == period) return &m;
  return nullptr;
}

std::optional<double> metric_of(const EvalMetrics& m, const std::string& metric) {
  if (metric == "pos") return m.pos_score;
  if (metric == "lemma") return m.lemma_accuracy;
  return m.ner_f1;
}

}  // namespace

TokenAlignment align_tokens(const AnnotatedSentence& gold, const AnnotatedSentence& pred) {
  if (gold.text != pred.text)
    throw ValidationError("sentence " + gold.id + ": gold and prediction texts differ");
  TokenAlignment a;
  std::size_t i = 0, j = 0;
  const auto& g = gold.tokens;
  const auto& p = pred.tokens;
  while (i < g.size() && j < p.size()) {
    const auto& x = g[i].token;
    const auto& y = p[j].token;
    if (x.char_start == y.char_start && x.char_end == y.char_end) {
      a.matched.emplace_back(i++, j++);
    } else if (x.char_end < y.char_end) {
      a.gold_only.push_back(i++);
    } else if (y.char_end < x.char_end) {
      a.pred_only.push_back(j++);
    } else {
      a.gold_only.push_back(i++);
      a.pred_only.push_back(j++);
    }
  }
  for (; i < g.size(); ++i) a.gold_only.push_back(i);
  for (; j < p.size(); ++j) a.pred_only.push_back(j);
  return a;
}

Prf prf(std::size_t correct, std::size_t predicted, std::size_t gold) {
  if (predicted == 0 && gold == 0) return {100, 100, 100};
  Prf r;
  if (predicted) r.precision = pct(correct, predicted);
  if (gold) r.recall = pct(correct, gold);
  r.f1 = pct(2 * correct, predicted + gold);
  return r;
}

Prf token_f1(const TokenAlignment& a) { return prf(a.matched.size(), a.pred_count(), a.gold_count()); }

double pos_score(const AnnotatedSentence& gold, const AnnotatedSentence& pred, const TokenAlignment& a) {
  std::size_t correct = 0;
  for (auto [gi, pi] : a.matched) correct += gold.tokens[gi].upos == pred.tokens[pi].upos;
  return prf(correct, a.pred_count(), a.gold_count()).f1;
}

std::optional<double> lemma_accuracy(const AnnotatedSentence& gold, const AnnotatedSentence& pred,
                                     const TokenAlignment& a, bool case_insensitive) {
  if (a.matched.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (auto [gi, pi] : a.matched) {
    auto x = gold.tokens[gi].lemma.value_or("");
    auto y = pred.tokens[pi].lemma.value_or("");
    if (case_insensitive) {
      x = utf8::fold_case(x);
      y = utf8::fold_case(y);
    }
    correct += x == y;
  }
  return pct(correct, a.matched.size());
}

std::set<EntitySpan> decode_entities(const AnnotatedSentence& s) {
  return decode_tags(entity_tags(s.tokens), s.tokens, s.id);
}

double ner_f1(const AnnotatedSentence& gold, const AnnotatedSentence& pred) {
  if (gold.text != pred.text) throw ValidationError("sentence " + gold.id + ": gold and prediction texts differ");
  auto g = decode_entities(gold);
  auto p = decode_entities(pred);
  return prf(count_intersection(g, p), p.size(), g.size()).f1;
}

std::optional<double> normalized(double metric_pct, double token_f1_pct) {
  if (token_f1_pct <= 0) return std::nullopt;
  return metric_pct / token_f1_pct * 100.0;
}

double round2(double value) {
  // epsilon absorbs representation error at exact decimal ties
  return std::floor(value * 100.0 + 0.5 + 1e-9) / 100.0;
}

std::string format_pct(std::optional<double> value) {
  if (!value) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << round2(*value);
  return out.str();
}

std::string_view to_string(NerMode mode) { return mode == NerMode::span ? "span" : "token"; }

NerMode parse_ner_mode(std::string_view s) {
  if (s == "span") return NerMode::span;
  if (s == "token") return NerMode::token;
  throw ValidationError("unknown NER mode: " + std::string(s));
}

EvalCounts& EvalCounts::operator+=(const EvalCounts& o) {
  sentences += o.sentences;
  gold_tokens += o.gold_tokens;
  pred_tokens += o.pred_tokens;
  matched += o.matched;
  pos_correct += o.pos_correct;
  lemma_correct += o.lemma_correct;
  gold_entities += o.gold_entities;
  pred_entities += o.pred_entities;
  entities_correct += o.entities_correct;
  ner_tokens_correct += o.ner_tokens_correct;
  return *this;
}

EvalMetrics metrics_from_counts(const EvalCounts& c, const LanguageProfile& profile, NerMode mode) {
  EvalMetrics m;
  m.counts = c;
  auto tok = prf(c.matched, c.pred_tokens, c.gold_tokens);
  m.token_precision = tok.precision;
  m.token_recall = tok.recall;
  m.token_f1 = tok.f1;
  m.pos_score = prf(c.pos_correct, c.pred_tokens, c.gold_tokens).f1;
  m.pos_norm = normalized(m.pos_score, m.token_f1);
  if (profile.requires_lemma && c.matched) m.lemma_accuracy = pct(c.lemma_correct, c.matched);
  if (profile.typed_entities()) {
    if (mode == NerMode::span) {
      m.ner_f1 = prf(c.entities_correct, c.pred_entities, c.gold_entities).f1;
    } else if (c.gold_tokens) {
      m.ner_f1 = pct(c.ner_tokens_correct, c.gold_tokens);
    }
    if (m.ner_f1) m.ner_norm = normalized(*m.ner_f1, m.token_f1);
  }
  return m;
}

std::string gold_fingerprint(const std::vector<AnnotatedSentence>& gold) {
  auto copy = gold;
  for (auto& s : copy) s.provenance = {};
  return sha256_hex(to_conllu(copy));
}

EvalReport evaluate(const std::vector<AnnotatedSentence>& gold, const std::vector<AnnotatedSentence>& pred,
                    const LanguageProfile& profile, const EvalOptions& options) {
  std::map<std::string, const AnnotatedSentence*> by_id;
  for (const auto& p : pred)
    if (!by_id.emplace(p.id, &p).second) throw ValidationError("duplicate prediction for sentence " + p.id);
  std::set<std::string> gold_ids;
  for (const auto& g : gold) {
    if (!gold_ids.insert(g.id).second) throw ValidationError("duplicate gold sentence " + g.id);
    if (!by_id.count(g.id)) throw ValidationError("no prediction for gold sentence " + g.id);
  }
  for (const auto& p : pred)
    if (!gold_ids.count(p.id)) throw ValidationError("prediction for unknown sentence " + p.id);

  std::map<std::string, EvalCounts> strata;
  EvalCounts total;
  for (const auto& g : gold) {
    const auto& p = *by_id.at(g.id);
    auto a = align_tokens(g, p);
    EvalCounts c;
    c.sentences = 1;
    c.gold_tokens = g.tokens.size();
    c.pred_tokens = p.tokens.size();
    c.matched = a.matched.size();
    for (auto [gi, pi] : a.matched) {
      const auto& x = g.tokens[gi];
      const auto& y = p.tokens[pi];
      c.pos_correct += x.upos == y.upos;
      if (profile.requires_lemma) {
        auto lx = x.lemma.value_or("");
        auto ly = y.lemma.value_or("");
        if (options.lemma_case_insensitive) {
          lx = utf8::fold_case(lx);
          ly = utf8::fold_case(ly);
        }
        c.lemma_correct += lx == ly;
      }
    }
    if (profile.typed_entities()) {
      auto gold_tags = entity_tags(g.tokens);
      auto pred_tags = entity_tags(p.tokens);
      if (options.repair_iob) pred_tags = repair_iob(pred_tags).tags;
      auto ge = decode_tags(gold_tags, g.tokens, g.id);
      auto pe = decode_tags(pred_tags, p.tokens, p.id);
      c.gold_entities = ge.size();
      c.pred_entities = pe.size();
      c.entities_correct = count_intersection(ge, pe);
      for (auto [gi, pi] : a.matched) c.ner_tokens_correct += gold_tags[gi] == pred_tags[pi];
    }
    strata[g.period] += c;
    total += c;
  }

  EvalReport r;
  r.language = profile.language;
  r.ner_mode = options.ner_mode;
  r.gold_fingerprint = gold_fingerprint(gold);
  r.overall = metrics_from_counts(total, profile, options.ner_mode);
  std::set<std::string> periods;
  for (const auto& [p, _] : strata) periods.insert(p);
  for (const auto& p : chronological(periods))
    r.per_stratum.emplace_back(p, metrics_from_counts(strata.at(p), profile, options.ner_mode));
  return r;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["model"] = r.model;
  j["language"] = to_string(r.language);
  j["ner_mode"] = to_string(r.ner_mode);
  j["gold_fingerprint"] = r.gold_fingerprint;
  j["overall"] = metrics_to_json(r.overall);
  auto strata = nlohmann::ordered_json::array();
  for (const auto& [p, m] : r.per_stratum) {
    auto s = metrics_to_json(m);
    s["period"] = p;
    strata.push_back(std::move(s));
  }
  j["per_stratum"] = std::move(strata);
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.dataset = j.value("dataset", std::string());
    r.model = j.value("model", std::string());
    r.language = parse_language(j.at("language").get<std::string>());
    r.ner_mode = parse_ner_mode(j.value("ner_mode", std::string("span")));
    r.gold_fingerprint = j.value("gold_fingerprint", std::string());
    r.overall = metrics_from_json(j.at("overall"));
    for (const auto& s : j.value("per_stratum", nlohmann::json::array()))
      r.per_stratum.emplace_back(s.at("period").get<std::string>(), metrics_from_json(s));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad evaluation report: ") + e.what());
  }
}

// ---- adjudication ---------------------------------------------------------

std::vector<std::string> adjudication_fields(const LanguageProfile& profile) {
  std::vector<std::string> f{"upos"};
  if (profile.requires_lemma) f.push_back("lemma");
  if (profile.typed_entities()) f.push_back("ner");
  return f;
}

nlohmann::ordered_json adjudication_to_json(const GoldAdjudication& a) {
  nlohmann::ordered_json j;
  j["sentence_id"] = a.sentence_id;
  j["reviewer"] = a.reviewer;
  j["timestamp"] = a.timestamp;
  auto vs = nlohmann::ordered_json::array();
  for (const auto& v : a.verdicts) {
    nlohmann::ordered_json o;
    o["token"] = v.token;
    o["field"] = v.field;
    o["verdict"] = v.verdict == Verdict::correct ? "correct" : "error";
    if (v.correction) o["correction"] = *v.correction;
    vs.push_back(std::move(o));
  }
  j["verdicts"] = std::move(vs);
  return j;
}

GoldAdjudication adjudication_from_json(const nlohmann::json& j) {
  try {
    GoldAdjudication a;
    a.sentence_id = j.at("sentence_id").get<std::string>();
    a.reviewer = j.value("reviewer", std::string());
    a.timestamp = j.value("timestamp", std::string());
    for (const auto& o : j.at("verdicts")) {
      FieldVerdict v;
      v.token = o.at("token").get<std::size_t>();
      v.field = o.at("field").get<std::string>();
      auto verdict = o.at("verdict").get<std::string>();
      if (verdict == "correct") {
        v.verdict = Verdict::correct;
      } else if (verdict == "error") {
        v.verdict = Verdict::error;
      } else {
        throw ValidationError("unknown verdict '" + verdict + "'");
      }
      if (o.contains("correction") && !o["correction"].is_null()) v.correction = o["correction"].get<std::string>();
      a.verdicts.push_back(std::move(v));
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad adjudication: ") + e.what());
  }
}

std::size_t AdjudicationRow::total_errors() const {
  std::size_t n = 0;
  for (const auto& [_, e] : errors) n += e;
  return n;
}

std::optional<double> AdjudicationRow::accuracy(const std::string& field) const {
  if (tokens == 0) return std::nullopt;
  auto it = errors.find(field);
  std::size_t e = it == errors.end() ? 0 : it->second;
  return pct(tokens - e, tokens);
}

AdjudicationTable adjudication_table_from_rows(std::vector<std::string> fields, std::vector<AdjudicationRow> rows) {
  AdjudicationTable t;
  t.fields = std::move(fields);
  t.overall.period = kOverallLabel;
  for (const auto& r : rows) {
    t.overall.sentences += r.sentences;
    t.overall.tokens += r.tokens;
    for (const auto& f : t.fields) {
      auto it = r.errors.find(f);
      t.overall.errors[f] += it == r.errors.end() ? 0 : it->second;
    }
  }
  t.rows = std::move(rows);
  return t;
}

AdjudicationTable adjudication_accuracy(const std::vector<AnnotatedSentence>& sentences,
                                        const std::vector<GoldAdjudication>& adjudications,
                                        const LanguageProfile& profile) {
  const auto fields = adjudication_fields(profile);
  std::map<std::string, const GoldAdjudication*> latest;
  for (const auto& a : adjudications) latest[a.sentence_id] = &a;

  std::map<std::string, AdjudicationRow> rows;
  std::vector<std::string> pending;
  std::set<std::string> known;
  for (const auto& s : sentences) {
    known.insert(s.id);
    auto it = latest.find(s.id);
    if (it == latest.end()) {
      pending.push_back(s.id);
      continue;
    }
    std::map<std::pair<std::size_t, std::string>, Verdict> cell;
    for (const auto& v : it->second->verdicts) {
      if (v.token >= s.tokens.size())
        throw ValidationError("adjudication for " + s.id + " names token " + std::to_string(v.token) +
                              " but the sentence has " + std::to_string(s.tokens.size()));
      if (std::find(fields.begin(), fields.end(), v.field) == fields.end())
        throw ValidationError("adjudication for " + s.id + " uses field '" + v.field + "' outside the profile");
      cell[{v.token, v.field}] = v.verdict;
    }
    if (cell.size() != s.tokens.size() * fields.size()) {
      pending.push_back(s.id);
      continue;
    }
    auto& row = rows[s.period];
    row.period = s.period;
    row.sentences += 1;
    row.tokens += s.tokens.size();
    for (const auto& f : fields) row.errors[f] += 0;
    for (const auto& [key, verdict] : cell)
      if (verdict == Verdict::error) row.errors[key.second] += 1;
  }
  for (const auto& [id, _] : latest)
    if (!known.count(id)) throw ValidationError("adjudication for unknown sentence " + id);

  std::set<std::string> periods;
  for (const auto& [p, _] : rows) periods.insert(p);
  std::vector<AdjudicationRow> ordered;
  for (const auto& p : chronological(periods)) ordered.push_back(rows.at(p));
  auto t = adjudication_table_from_rows(fields, std::move(ordered));
  t.pending = std::move(pending);
  if (!t.pending.empty())
    t.warnings.push_back(std::to_string(t.pending.size()) + " sentence(s) pending adjudication were excluded");
  return t;
}

nlohmann::ordered_json adjudication_table_to_json(const AdjudicationTable& t) {
  auto row_json = [&](const AdjudicationRow& r) {
    nlohmann::ordered_json j;
    j["period"] = r.period;
    j["sentences"] = r.sentences;
    j["tokens"] = r.tokens;
    j["total_errors"] = r.total_errors();
    for (const auto& f : t.fields) {
      auto it = r.errors.find(f);
      j[f + "_errors"] = it == r.errors.end() ? 0 : it->second;
      auto acc = r.accuracy(f);
      j[f + "_accuracy"] = acc ? nlohmann::ordered_json(*acc) : nlohmann::ordered_json();
    }
    return j;
  };
  nlohmann::ordered_json j;
  j["fields"] = t.fields;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) rows.push_back(row_json(r));
  j["rows"] = std::move(rows);
  j["overall"] = row_json(t.overall);
  j["pending"] = t.pending;
  j["warnings"] = t.warnings;
  return j;
}

// ---- comparison -----------------------------------------------------------

Comparison compare_models(const EvalReport& a, const EvalReport& b) {
  if (a.gold_fingerprint != b.gold_fingerprint)
    throw ValidationError("reports were computed over different gold sets (" + a.model + " vs " + b.model + ")");
  Comparison c{a.model, b.model, {}};
  std::vector<std::string> metrics{"pos"};
  if (a.overall.lemma_accuracy || b.overall.lemma_accuracy) metrics.push_back("lemma");
  if (a.overall.ner_f1 || b.overall.ner_f1) metrics.push_back("ner");
  auto add = [&](const std::string& period, const EvalMetrics* x, const EvalMetrics* y) {
    for (const auto& m : metrics) {
      MetricDelta d{period, m, x ? metric_of(*x, m) : std::nullopt, y ? metric_of(*y, m) : std::nullopt, {}};
      if (d.a && d.b) d.delta = *d.a - *d.b;
      c.rows.push_back(std::move(d));
    }
  };
  std::set<std::string> periods;
  for (const auto& [p, _] : a.per_stratum) periods.insert(p);
  for (const auto& [p, _] : b.per_stratum) periods.insert(p);
  for (const auto& p : chronological(periods)) add(p, find_stratum(a, p), find_stratum(b, p));
  add(kOverallLabel, &a.overall, &b.overall);
  return c;
}

// ---- rendering ------------------------------------------------------------

std::string render_scores_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "";
  const bool chinese = reports.front().language == Language::chinese;
  std::vector<std::vector<std::string>> rows;
  if (chinese) {
    for (const auto& r : reports) {
      const auto& m = r.overall;
      rows.push_back({r.dataset, r.model, format_pct(m.token_f1), format_pct(m.pos_score), format_pct(m.pos_norm),
                      format_pct(m.ner_f1), format_pct(m.ner_norm)});
    }
    return render_grid({"Dataset", "Model", "Token F1", "POS", "POS_Norm", "NER", "NER_Norm"}, rows);
  }
  for (const auto& r : reports) {
    const auto& m = r.overall;
    rows.push_back({r.dataset, r.model, format_pct(m.token_f1), format_pct(m.pos_score), format_pct(m.pos_norm),
                    format_pct(m.lemma_accuracy)});
  }
  return render_grid({"Dataset", "Model", "Token F1", "POS", "POS_Norm", "Lemma"}, rows);
}

std::string render_period_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "";
  const bool chinese = reports.front().language == Language::chinese;
  std::set<std::string> periods;
  for (const auto& r : reports)
    for (const auto& [p, _] : r.per_stratum) periods.insert(p);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
  auto cells = [&](const std::string& label, const std::string& model, const EvalMetrics& m) {
    return std::vector<std::string>{label, model, format_pct(m.pos_score),
                                    format_pct(chinese ? m.ner_f1 : m.lemma_accuracy)};
  };
  for (const auto& p : chronological(periods)) {
    for (const auto& r : reports) {
      const auto* m = find_stratum(r, p);
      if (!m || m->counts.gold_tokens == 0) {
        notes.push_back("note: " + p + " omitted for " + r.model + " (no gold tokens)");
        continue;
      }
      rows.push_back(cells(p, r.model, *m));
    }
  }
  for (const auto& r : reports) rows.push_back(cells(kOverallLabel, r.model, r.overall));
  auto out = render_grid({"Period", "Model", "POS Acc (%)", chinese ? "NER (%)" : "Lemma Acc (%)"}, rows);
  for (const auto& n : notes) out += n + "\n";
  return out;
}

std::string render_adjudication_table(const AdjudicationTable& t, const std::string& first_column) {
  std::vector<std::string> header{first_column, "Total Tokens", "Total Labeling Errors"};
  for (const auto& f : t.fields) header.push_back((f == "upos" ? std::string("POS") : f == "lemma" ? "Lemma" : "NER") + " Acc. (%)");
  std::vector<std::vector<std::string>> rows;
  auto row = [&](const AdjudicationRow& r) {
    std::vector<std::string> cells{r.period, std::to_string(r.tokens), std::to_string(r.total_errors())};
    for (const auto& f : t.fields) cells.push_back(format_pct(r.accuracy(f)));
    rows.push_back(std::move(cells));
  };
  for (const auto& r : t.rows) row(r);
  row(t.overall);
  auto out = render_grid(header, rows);
  for (const auto& w : t.warnings) out += "note: " + w + "\n";
  return out;
}

std::string render_comparison(const Comparison& c) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : c.rows) {
    std::string delta = "n/a";
    if (d.delta) {
      delta = format_pct(std::abs(*d.delta));
      delta = (*d.delta < 0 && delta != "0.00" ? "-" : "+") + delta;
    }
    rows.push_back({d.period, d.metric, format_pct(d.a), format_pct(d.b), delta});
  }
  return render_grid({"Period", "Metric", c.model_a, c.model_b, "Delta"}, rows);
}

std::string pos_series_csv(const std::vector<EvalReport>& reports) {
  std::set<std::string> periods;
  for (const auto& r : reports)
    for (const auto& [p, _] : r.per_stratum) periods.insert(p);
  std::string out = "period,model,pos\n";
  for (const auto& p : chronological(periods))
    for (const auto& r : reports)
      if (const auto* m = find_stratum(r, p); m && m->counts.gold_tokens > 0)
        out += p + "," + r.model + "," + format_pct(m->pos_score) + "\n";
  return out;
}

}  // namespace histanno
