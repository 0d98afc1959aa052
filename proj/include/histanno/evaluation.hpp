#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "histanno/schema.hpp"

namespace histanno {

// ---- alignment and per-sentence scores ------------------------------------

struct TokenAlignment {
  std::vector<std::pair<std::size_t, std::size_t>> matched;  // (gold, pred)
  std::vector<std::size_t> gold_only;
  std::vector<std::size_t> pred_only;

  std::size_t gold_count() const { return matched.size() + gold_only.size(); }
  std::size_t pred_count() const { return matched.size() + pred_only.size(); }
};

// Throws ValidationError when the two sentence texts differ.
TokenAlignment align_tokens(const AnnotatedSentence& gold, const AnnotatedSentence& pred);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Percentages from raw counts. Both sides empty gives 100/100/100; one side
// empty gives 0/0/0.
Prf prf(std::size_t correct, std::size_t predicted, std::size_t gold);

Prf token_f1(const TokenAlignment& a);

// Joint span+tag F1 over upos.
double pos_score(const AnnotatedSentence& gold, const AnnotatedSentence& pred, const TokenAlignment& a);

// Over matched pairs; nullopt when nothing matched.
std::optional<double> lemma_accuracy(const AnnotatedSentence& gold, const AnnotatedSentence& pred,
                                     const TokenAlignment& a, bool case_insensitive = false);

using EntitySpan = std::tuple<std::size_t, std::size_t, std::string>;  // char_start, char_end, type

// Throws ValidationError on an invalid IOB sequence.
std::set<EntitySpan> decode_entities(const AnnotatedSentence& s);

double ner_f1(const AnnotatedSentence& gold, const AnnotatedSentence& pred);

// (metric / token_f1) * 100; nullopt when token_f1 is 0.
std::optional<double> normalized(double metric_pct, double token_f1_pct);

// Half-up to two decimals, e.g. "90.21". nullopt renders as "n/a".
double round2(double value);
std::string format_pct(std::optional<double> value);

// ---- corpus-level reports -------------------------------------------------

enum class NerMode { span, token };
std::string_view to_string(NerMode mode);
NerMode parse_ner_mode(std::string_view s);

struct EvalOptions {
  NerMode ner_mode = NerMode::span;
  bool lemma_case_insensitive = false;
  bool repair_iob = false;  // repair predicted IOB before decoding
};

// Additive, so corpus scores are micro-averages.
struct EvalCounts {
  std::size_t sentences = 0;
  std::size_t gold_tokens = 0;
  std::size_t pred_tokens = 0;
  std::size_t matched = 0;
  std::size_t pos_correct = 0;
  std::size_t lemma_correct = 0;
  std::size_t gold_entities = 0;
  std::size_t pred_entities = 0;
  std::size_t entities_correct = 0;
  std::size_t ner_tokens_correct = 0;

  EvalCounts& operator+=(const EvalCounts& o);
  bool operator==(const EvalCounts&) const = default;
};

struct EvalMetrics {
  double token_precision = 0;
  double token_recall = 0;
  double token_f1 = 0;
  double pos_score = 0;
  std::optional<double> pos_norm;
  std::optional<double> lemma_accuracy;
  std::optional<double> ner_f1;
  std::optional<double> ner_norm;
  EvalCounts counts;
};

EvalMetrics metrics_from_counts(const EvalCounts& c, const LanguageProfile& profile, NerMode mode);

struct EvalReport {
  std::string dataset;
  std::string model;
  Language language = Language::french;
  NerMode ner_mode = NerMode::span;
  std::string gold_fingerprint;
  EvalMetrics overall;
  std::vector<std::pair<std::string, EvalMetrics>> per_stratum;  // chronological
};

std::string gold_fingerprint(const std::vector<AnnotatedSentence>& gold);

// Predictions are matched to gold by sentence id; a gold sentence without a
// prediction, or a prediction without gold, is a ValidationError.
EvalReport evaluate(const std::vector<AnnotatedSentence>& gold, const std::vector<AnnotatedSentence>& pred,
                    const LanguageProfile& profile, const EvalOptions& options = {});

nlohmann::ordered_json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

// ---- adjudication ---------------------------------------------------------

enum class Verdict { correct, error };

struct FieldVerdict {
  std::size_t token = 0;
  std::string field;  // upos | lemma | ner
  Verdict verdict = Verdict::correct;
  std::optional<std::string> correction;

  bool operator==(const FieldVerdict&) const = default;
};

struct GoldAdjudication {
  std::string sentence_id;
  std::string reviewer;
  std::string timestamp;
  std::vector<FieldVerdict> verdicts;

  bool operator==(const GoldAdjudication&) const = default;
};

// upos + lemma for French, upos + ner for Chinese.
std::vector<std::string> adjudication_fields(const LanguageProfile& profile);

nlohmann::ordered_json adjudication_to_json(const GoldAdjudication& a);
GoldAdjudication adjudication_from_json(const nlohmann::json& j);  // throws ValidationError

struct AdjudicationRow {
  std::string period;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::map<std::string, std::size_t> errors;  // per field

  std::size_t total_errors() const;
  std::optional<double> accuracy(const std::string& field) const;
};

struct AdjudicationTable {
  std::vector<std::string> fields;
  std::vector<AdjudicationRow> rows;  // chronological
  AdjudicationRow overall;
  std::vector<std::string> pending;
  std::vector<std::string> warnings;
};

// Sentences without a complete verdict set are listed as pending and left out.
// A later adjudication for the same sentence replaces an earlier one.
AdjudicationTable adjudication_accuracy(const std::vector<AnnotatedSentence>& sentences,
                                        const std::vector<GoldAdjudication>& adjudications,
                                        const LanguageProfile& profile);

// Rows built directly from counts, for published tables.
AdjudicationTable adjudication_table_from_rows(std::vector<std::string> fields, std::vector<AdjudicationRow> rows);

nlohmann::ordered_json adjudication_table_to_json(const AdjudicationTable& t);

// ---- comparison -----------------------------------------------------------

struct MetricDelta {
  std::string period;  // "All Periods" for the overall row
  std::string metric;  // pos | lemma | ner
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> delta;  // a - b
};

struct Comparison {
  std::string model_a;
  std::string model_b;
  std::vector<MetricDelta> rows;
};

// Throws ValidationError unless both reports share a gold fingerprint.
Comparison compare_models(const EvalReport& a, const EvalReport& b);

// ---- rendering ------------------------------------------------------------

inline constexpr const char* kOverallLabel = "All Periods";

// Dataset/model score table: POS and Lemma for French; Token F1, POS,
// POS_Norm, NER, NER_Norm for Chinese.
std::string render_scores_table(const std::vector<EvalReport>& reports);
// Per-period rows for every model plus an overall row; strata with no gold
// tokens are dropped and listed in a note.
std::string render_period_table(const std::vector<EvalReport>& reports);
std::string render_adjudication_table(const AdjudicationTable& t, const std::string& first_column = "Period");
std::string render_comparison(const Comparison& c);
// "period,model,pos" with one row per (period, model).
std::string pos_series_csv(const std::vector<EvalReport>& reports);

}  // namespace histanno
