#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "histanno/error.hpp"

namespace histanno {

enum class Granularity { century, decade };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view s);

// "1600-1700" for centuries (end exclusive), "1920-1929" for decades.
std::string period_label(int year, Granularity g);
// Accepts a label verbatim when it fits the grammar of `g`; returns its start year.
std::optional<int> parse_period_label(std::string_view label, Granularity g);

struct CorpusRecord {
  std::string id;
  std::string text;
  // Either an integer year or an explicit period label.
  std::variant<int, std::string> date;
  std::string source;
  std::string period;  // resolved stratum label

  bool operator==(const CorpusRecord&) const = default;
};

struct Stratum {
  std::string label;
  Granularity granularity = Granularity::century;
  std::vector<std::string> members;  // record ids in ingestion order
};

struct SampleSpec {
  std::size_t per_stratum_count = 0;
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::century;
};

struct IngestIssue {
  std::size_t line = 0;
  std::string message;
};

class IngestError : public ValidationError {
 public:
  explicit IngestError(std::vector<IngestIssue> issues);
  const std::vector<IngestIssue>& issues() const { return issues_; }

 private:
  std::vector<IngestIssue> issues_;
};

class CorpusStore {
 public:
  CorpusStore(std::vector<CorpusRecord> records, Granularity g);

  Granularity granularity() const { return granularity_; }
  const std::vector<CorpusRecord>& records() const { return records_; }
  // Ordered chronologically by start year.
  const std::vector<Stratum>& strata() const { return strata_; }
  const CorpusRecord& record(std::string_view id) const;
  const Stratum* stratum(std::string_view label) const;

 private:
  Granularity granularity_;
  std::vector<CorpusRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Stratum> strata_;
};

// Line-delimited JSON {id, text, date, source}. Collects every malformed line
// before throwing IngestError.
CorpusStore ingest_corpus(std::istream& in, Granularity g);

std::string record_to_line(const CorpusRecord& r);

// Exactly spec.per_stratum_count records from every stratum, strata in
// chronological order, each stratum shuffled with its own derived seed.
std::vector<CorpusRecord> stratified_sample(const CorpusStore& store, const SampleSpec& spec);

// The sampling core, also used to draw review sessions. Groups keep their
// map order; throws ValidationError if a group is smaller than `count`.
std::vector<std::string> sample_groups(const std::vector<std::pair<std::string, std::vector<std::string>>>& groups,
                                       std::size_t count, std::uint64_t seed);

}  // namespace histanno
