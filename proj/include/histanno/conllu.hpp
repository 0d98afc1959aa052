#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "histanno/schema.hpp"

namespace histanno {

// Ten-column CoNLL-U. Sentence comments: sent_id, text, period, language,
// provenance (JSON). FEATS, HEAD and DEPS are always "_". MISC carries
// SpaceAfter=No and NER=<iob>[-<type>].
std::string to_conllu(const std::vector<AnnotatedSentence>& sentences);
void export_conllu(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& sentences);

// `fallback` is used for blocks without a "# language" comment. Each sentence
// is validated against its profile. Throws ValidationError naming the line.
std::vector<AnnotatedSentence> parse_conllu(std::string_view text, std::optional<Language> fallback = std::nullopt);
std::vector<AnnotatedSentence> import_conllu(const std::filesystem::path& path,
                                             std::optional<Language> fallback = std::nullopt);

// One JSON object per line with parallel arrays (words, spaces, pos, tag,
// lemma, ent) plus typed entity character spans.
std::string to_training_json(const std::vector<AnnotatedSentence>& sentences);
void export_training_json(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& sentences);

}  // namespace histanno
