#include "histanno/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <set>

#include <json.hpp>

#include "histanno/rng.hpp"

namespace histanno {

namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

std::optional<int> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string describe(const std::vector<IngestIssue>& issues) {
  std::string msg = "corpus ingestion failed:";
  for (const auto& i : issues) msg += "\n  line " + std::to_string(i.line) + ": " + i.message;
  return msg;
}

}  // namespace

std::string_view to_string(Granularity g) { return g == Granularity::century ? "century" : "decade"; }

Granularity parse_granularity(std::string_view s) {
  if (s == "century") return Granularity::century;
  if (s == "decade") return Granularity::decade;
  throw ValidationError("unknown granularity: " + std::string(s));
}

std::string period_label(int year, Granularity g) {
  if (g == Granularity::century) {
    int start = floor_div(year, 100) * 100;
    return std::to_string(start) + "-" + std::to_string(start + 100);
  }
  int start = floor_div(year, 10) * 10;
  return std::to_string(start) + "-" + std::to_string(start + 9);
}

std::optional<int> parse_period_label(std::string_view label, Granularity g) {
  auto dash = label.find('-', 1);
  if (dash == std::string_view::npos) return std::nullopt;
  auto start = parse_int(label.substr(0, dash));
  auto end = parse_int(label.substr(dash + 1));
  if (!start || !end) return std::nullopt;
  if (period_label(*start, g) != label) return std::nullopt;
  (void)end;
  return start;
}

IngestError::IngestError(std::vector<IngestIssue> issues)
    : ValidationError(describe(issues)), issues_(std::move(issues)) {}

CorpusStore::CorpusStore(std::vector<CorpusRecord> records, Granularity g)
    : granularity_(g), records_(std::move(records)) {
  std::map<int, Stratum> by_start;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!index_.emplace(r.id, i).second) throw ValidationError("duplicate id: " + r.id);
    auto start = parse_period_label(r.period, g);
    if (!start) throw ValidationError("record " + r.id + " has unresolvable period " + r.period);
    auto& s = by_start[*start];
    s.label = r.period;
    s.granularity = g;
    s.members.push_back(r.id);
  }
  for (auto& [start, s] : by_start) strata_.push_back(std::move(s));
}

const CorpusRecord& CorpusStore::record(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw ValidationError("unknown record id: " + std::string(id));
  return records_[it->second];
}

const Stratum* CorpusStore::stratum(std::string_view label) const {
  for (const auto& s : strata_)
    if (s.label == label) return &s;
  return nullptr;
}

CorpusStore ingest_corpus(std::istream& in, Granularity g) {
  std::vector<CorpusRecord> records;
  std::vector<IngestIssue> issues;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      issues.push_back({lineno, "not a JSON object"});
      continue;
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty()) {
      issues.push_back({lineno, "missing id"});
      continue;
    }
    CorpusRecord r;
    r.id = j["id"].get<std::string>();
    if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty()) {
      issues.push_back({lineno, "empty text for id " + r.id});
      continue;
    }
    r.text = j["text"].get<std::string>();
    if (r.text.find_first_of("\r\n") != std::string::npos) {
      issues.push_back({lineno, "line break in text for id " + r.id});
      continue;
    }
    r.source = j.value("source", std::string());
    const auto date = j.contains("date") ? j["date"] : nlohmann::json();
    if (date.is_number_integer()) {
      int year = date.get<int>();
      if (year < 0) {
        issues.push_back({lineno, "unparsable date for id " + r.id});
        continue;
      }
      r.date = year;
      r.period = period_label(year, g);
    } else if (date.is_string()) {
      auto s = date.get<std::string>();
      if (auto year = parse_int(s); year && *year >= 0) {
        r.date = *year;
        r.period = period_label(*year, g);
      } else if (parse_period_label(s, g)) {
        r.date = s;
        r.period = s;
      } else {
        issues.push_back({lineno, "unparsable date '" + s + "' for id " + r.id});
        continue;
      }
    } else {
      issues.push_back({lineno, "unparsable date for id " + r.id});
      continue;
    }
    if (!seen.insert(r.id).second) {
      issues.push_back({lineno, "duplicate id " + r.id});
      continue;
    }
    records.push_back(std::move(r));
  }
  if (!issues.empty()) throw IngestError(std::move(issues));
  return CorpusStore(std::move(records), g);
}

std::string record_to_line(const CorpusRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["text"] = r.text;
  if (std::holds_alternative<int>(r.date))
    j["date"] = std::get<int>(r.date);
  else
    j["date"] = std::get<std::string>(r.date);
  j["source"] = r.source;
  j["period"] = r.period;
  return j.dump();
}

std::vector<std::string> sample_groups(const std::vector<std::pair<std::string, std::vector<std::string>>>& groups,
                                       std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("per-stratum count must be positive");
  for (const auto& [label, members] : groups) {
    if (members.size() < count)
      throw ValidationError("stratum " + label + " has " + std::to_string(members.size()) +
                            " records, fewer than the requested " + std::to_string(count));
  }
  std::vector<std::string> out;
  out.reserve(groups.size() * count);
  for (const auto& [label, members] : groups) {
    auto shuffled = members;
    seeded_shuffle(shuffled, derive_seed(seed, label));
    out.insert(out.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(count));
  }
  return out;
}

std::vector<CorpusRecord> stratified_sample(const CorpusStore& store, const SampleSpec& spec) {
  if (spec.granularity != store.granularity())
    throw ValidationError("sample granularity does not match the store");
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  for (const auto& s : store.strata()) groups.emplace_back(s.label, s.members);
  std::vector<CorpusRecord> out;
  for (const auto& id : sample_groups(groups, spec.per_stratum_count, spec.seed)) out.push_back(store.record(id));
  return out;
}

}  // namespace histanno
