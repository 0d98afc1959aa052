#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "histanno/error.hpp"
#include "histanno/schema.hpp"

namespace histanno {

// Closed-set membership of upos/xpos/entity fields, plus IOB/type consistency
// (an O token carries no type; a typed profile needs a type on B/I).
std::vector<std::string> validate_tags(const TokenAnnotation& a, const LanguageProfile& profile);

// Presence rules: lemma iff the profile requires it, dep when required.
std::vector<std::string> validate_fields(const TokenAnnotation& a, const LanguageProfile& profile);

struct EntityTag {
  Iob iob = Iob::O;
  std::string type;

  bool operator==(const EntityTag&) const = default;
};

std::vector<EntityTag> entity_tags(const std::vector<TokenAnnotation>& tokens);

struct IobViolation {
  std::size_t index = 0;
  std::string message;
};

// Strict IOB2: an I must follow a B or I of the same type.
std::vector<IobViolation> validate_iob(const std::vector<EntityTag>& tags);

struct IobRepair {
  std::size_t index = 0;
  EntityTag before;
  EntityTag after;
};

struct RepairedIob {
  std::vector<EntityTag> tags;
  std::vector<IobRepair> repairs;
};

// Rewrites every orphan I to B of the same type.
RepairedIob repair_iob(const std::vector<EntityTag>& tags);

class OffsetMismatchError : public ValidationError {
 public:
  OffsetMismatchError(std::size_t position, const std::string& detail)
      : ValidationError("token/text mismatch at offset " + std::to_string(position) + ": " + detail),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Greedy left-to-right alignment of token texts onto the sentence. For
// whitespace scripts a single separator may sit between two tokens and is
// recorded as trailing_space on the left token. Throws OffsetMismatchError
// naming the first code point that could not be matched.
std::vector<Token> reconstruct_offsets(std::string_view sentence_text,
                                       const std::vector<std::string>& token_texts,
                                       const LanguageProfile& profile);

// Inverse of reconstruct_offsets: token texts joined with one space where
// trailing_space is set.
std::string join_tokens(const std::vector<TokenAnnotation>& tokens);

// Every structural check a sentence must pass before it may leave a stage.
std::vector<std::string> validate_sentence(const AnnotatedSentence& s, const LanguageProfile& profile);

}  // namespace histanno
