#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "histanno/corpus.hpp"
#include "histanno/schema.hpp"

namespace histanno {

enum class ParseErrorKind { malformed_json, missing_key, tag_violation, offset_mismatch };

std::string_view to_string(ParseErrorKind kind);

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::malformed_json;
  std::string message;
};

// First balanced top-level {...} in `raw`, skipping braces inside JSON strings.
// Leading and trailing prose is ignored.
std::optional<std::string_view> extract_json_object(std::string_view raw);

// Strict parse of one provider reply for `record`. Token keys must be exactly
// the profile's keys; the result must pass every schema validator.
std::variant<AnnotatedSentence, ParseError> parse_response(std::string_view raw, const CorpusRecord& record,
                                                           const LanguageProfile& profile);

}  // namespace histanno
