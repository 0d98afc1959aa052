#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "histanno/schema.hpp"

namespace histanno {

// ---- fix rules ------------------------------------------------------------
//
// One rule per line:
//   surface [icase] [upos=TAG] [xpos=TAG] -> [upos=TAG] [xpos=TAG] [lemma=TEXT]
// '#' starts a comment line.

struct FixRule {
  std::string match_text;
  bool case_insensitive = false;
  std::optional<std::string> match_upos;
  std::optional<std::string> match_xpos;
  std::optional<std::string> set_upos;
  std::optional<std::string> set_xpos;
  std::optional<std::string> set_lemma;
  std::size_t line = 0;

  bool matches(const TokenAnnotation& t) const;
};

struct FixChange {
  std::string sentence_id;
  std::size_t token = 0;
  std::string field;
  std::string before;
  std::string after;

  bool operator==(const FixChange&) const = default;
};

// Throws ValidationError on syntax errors, unknown tags, or a rule whose
// output could satisfy another rule's precondition.
std::vector<FixRule> parse_fix_rules(std::string_view text, const LanguageProfile& profile);
std::vector<FixRule> load_fix_rules(const std::filesystem::path& path, const LanguageProfile& profile);

std::vector<FixChange> apply_fix_rules(std::vector<AnnotatedSentence>& sentences, const std::vector<FixRule>& rules);

std::string fix_change_to_line(const FixChange& c);

// ---- xpos -> upos mapping -------------------------------------------------

class MappingTable {
 public:
  // TSV: "XPOS<TAB>UPOS[,UPOS...]"; '#' lines are comments, "# version N" is recorded.
  static MappingTable parse(std::string_view tsv, const LanguageProfile& profile);
  static MappingTable load(const std::filesystem::path& path, const LanguageProfile& profile);
  static const MappingTable& builtin(Language lang);

  Language language() const { return language_; }
  const std::string& version() const { return version_; }
  const std::set<std::string>& permitted(const std::string& xpos) const;
  const std::map<std::string, std::set<std::string>>& entries() const { return entries_; }

 private:
  Language language_ = Language::french;
  std::string version_;
  std::map<std::string, std::set<std::string>> entries_;
};

struct UdFlag {
  std::string sentence_id;
  std::size_t token = 0;
  std::string xpos;
  std::string upos;
  std::optional<std::string> corrected_to;
};

std::vector<UdFlag> check_ud_consistency(AnnotatedSentence& sentence, const MappingTable& mapping,
                                         bool auto_correct);

// ---- augmentation ---------------------------------------------------------

struct AugmentationSpec {
  std::set<std::string> rare_upos{"INTJ"};
  std::set<std::string> rare_xpos{"VIMP"};
  int factor = 2;
};

struct AugmentationReport {
  std::size_t input = 0;
  std::size_t matched = 0;
  std::size_t copies = 0;
  std::size_t output = 0;
};

bool has_rare_tag(const AnnotatedSentence& s, const AugmentationSpec& spec);

// Copies are inserted right after their original and differ only in
// provenance.augmented_copy (1..factor-1).
std::vector<AnnotatedSentence> augment_rare(const std::vector<AnnotatedSentence>& train,
                                            const AugmentationSpec& spec, AugmentationReport* report = nullptr);

// ---- split ----------------------------------------------------------------

struct SplitSpec {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

void validate_split_spec(const SplitSpec& spec);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
};

struct SplitResult {
  std::vector<AnnotatedSentence> train;
  std::vector<AnnotatedSentence> dev;
  std::vector<AnnotatedSentence> test;
  std::map<std::string, SplitCounts> per_stratum;
  std::vector<std::string> warnings;
};

// Strata come out in chronological order; inside a stratum the seeded
// shuffle order is kept.
SplitResult stratified_split(const std::vector<AnnotatedSentence>& sentences, const SplitSpec& spec);

// Numeric start of a period label such as "1600-1700"; throws on junk.
int period_start(std::string_view label);

}  // namespace histanno
