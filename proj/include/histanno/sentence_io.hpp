#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "histanno/schema.hpp"

namespace histanno {

// One JSON object per sentence; keys mirror the AnnotatedSentence fields.
nlohmann::ordered_json sentence_to_json(const AnnotatedSentence& s);
AnnotatedSentence sentence_from_json(const nlohmann::json& j);  // throws ValidationError

std::string sentence_to_line(const AnnotatedSentence& s);

std::vector<AnnotatedSentence> read_sentences(std::istream& in);
std::vector<AnnotatedSentence> read_sentences(const std::filesystem::path& path);
void write_sentences(std::ostream& out, const std::vector<AnnotatedSentence>& sentences);
void write_sentences(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& sentences);

// Whole-file helpers shared by the stages.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace histanno
