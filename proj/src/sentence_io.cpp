#include "histanno/sentence_io.hpp"

#include <fstream>
#include <sstream>

#include "histanno/error.hpp"

namespace histanno {

nlohmann::ordered_json sentence_to_json(const AnnotatedSentence& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["text"] = s.text;
  j["language"] = to_string(s.language);
  j["period"] = s.period;
  auto& tokens = j["tokens"] = nlohmann::ordered_json::array();
  for (const auto& t : s.tokens) {
    nlohmann::ordered_json tj;
    tj["token"] = {{"text", t.token.text},
                   {"char_start", t.token.char_start},
                   {"char_end", t.token.char_end},
                   {"trailing_space", t.token.trailing_space}};
    tj["upos"] = t.upos;
    tj["xpos"] = t.xpos;
    if (t.lemma) tj["lemma"] = *t.lemma;
    if (t.dep) tj["dep"] = *t.dep;
    tj["ent_iob"] = std::string(1, to_char(t.ent_iob));
    tj["ent_type"] = t.ent_type;
    tokens.push_back(std::move(tj));
  }
  nlohmann::ordered_json prov;
  prov["model_id"] = s.provenance.model_id;
  prov["temperatures"] = s.provenance.temperatures;
  prov["timestamp"] = s.provenance.timestamp;
  if (s.provenance.augmented_copy != 0) prov["augmented_copy"] = s.provenance.augmented_copy;
  j["provenance"] = std::move(prov);
  return j;
}

AnnotatedSentence sentence_from_json(const nlohmann::json& j) {
  try {
    AnnotatedSentence s;
    s.id = j.at("id").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.language = parse_language(j.at("language").get<std::string>());
    s.period = j.at("period").get<std::string>();
    for (const auto& tj : j.at("tokens")) {
      TokenAnnotation t;
      const auto& tok = tj.at("token");
      t.token.text = tok.at("text").get<std::string>();
      t.token.char_start = tok.at("char_start").get<std::size_t>();
      t.token.char_end = tok.at("char_end").get<std::size_t>();
      t.token.trailing_space = tok.at("trailing_space").get<bool>();
      t.upos = tj.at("upos").get<std::string>();
      t.xpos = tj.at("xpos").get<std::string>();
      if (tj.contains("lemma")) t.lemma = tj["lemma"].get<std::string>();
      if (tj.contains("dep")) t.dep = tj["dep"].get<std::string>();
      auto iob = parse_iob(tj.at("ent_iob").get<std::string>());
      if (!iob) throw ValidationError("bad ent_iob in sentence " + s.id);
      t.ent_iob = *iob;
      t.ent_type = tj.at("ent_type").get<std::string>();
      s.tokens.push_back(std::move(t));
    }
    if (j.contains("provenance")) {
      const auto& p = j["provenance"];
      s.provenance.model_id = p.value("model_id", std::string());
      s.provenance.temperatures = p.value("temperatures", std::vector<double>{});
      s.provenance.timestamp = p.value("timestamp", std::string());
      s.provenance.augmented_copy = p.value("augmented_copy", 0);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed sentence record: ") + e.what());
  }
}

std::string sentence_to_line(const AnnotatedSentence& s) { return sentence_to_json(s).dump(); }

std::vector<AnnotatedSentence> read_sentences(std::istream& in) {
  std::vector<AnnotatedSentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sentence_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotatedSentence> read_sentences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_sentences(in);
}

void write_sentences(std::ostream& out, const std::vector<AnnotatedSentence>& sentences) {
  for (const auto& s : sentences) out << sentence_to_line(s) << '\n';
}

void write_sentences(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& sentences) {
  std::ostringstream ss;
  write_sentences(ss, sentences);
  write_file(path, ss.str());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << contents;
}

}  // namespace histanno
