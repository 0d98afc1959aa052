#include "histanno/conllu.hpp"

#include <sstream>

#include <json.hpp>

#include "histanno/error.hpp"
#include "histanno/sentence_io.hpp"
#include "histanno/validate.hpp"

namespace histanno {

namespace {

void check_field(const AnnotatedSentence& s, const std::string& value, const char* what) {
  if (value.find_first_of("\t\n\r") != std::string::npos)
    throw ValidationError("sentence " + s.id + ": " + what + " contains a tab or line break");
}

std::string provenance_json(const Provenance& p) {
  nlohmann::ordered_json j;
  j["model_id"] = p.model_id;
  j["temperatures"] = p.temperatures;
  j["timestamp"] = p.timestamp;
  if (p.augmented_copy != 0) j["augmented_copy"] = p.augmented_copy;
  return j.dump();
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

struct Block {
  std::size_t first_line = 0;
  std::vector<std::pair<std::string, std::string>> comments;
  std::vector<std::pair<std::size_t, std::string>> rows;
};

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw ValidationError("CoNLL-U line " + std::to_string(line) + ": " + msg);
}

AnnotatedSentence parse_block(const Block& b, std::optional<Language> fallback) {
  AnnotatedSentence s;
  std::optional<Language> lang = fallback;
  bool have_id = false, have_text = false;
  for (const auto& [key, value] : b.comments) {
    if (key == "sent_id") {
      s.id = value;
      have_id = true;
    } else if (key == "text") {
      s.text = value;
      have_text = true;
    } else if (key == "period") {
      s.period = value;
    } else if (key == "language") {
      lang = parse_language(value);
    } else if (key == "provenance") {
      auto j = nlohmann::json::parse(value, nullptr, false);
      if (j.is_discarded() || !j.is_object()) fail(b.first_line, "provenance is not a JSON object");
      s.provenance.model_id = j.value("model_id", std::string());
      s.provenance.temperatures = j.value("temperatures", std::vector<double>{});
      s.provenance.timestamp = j.value("timestamp", std::string());
      s.provenance.augmented_copy = j.value("augmented_copy", 0);
    }
  }
  if (!have_id) fail(b.first_line, "missing '# sent_id'");
  if (!have_text) fail(b.first_line, "missing '# text'");
  if (!lang) fail(b.first_line, "missing '# language'");
  s.language = *lang;
  const auto& profile = builtin_profile(s.language);

  std::vector<std::string> forms;
  std::vector<bool> space_after;
  for (const auto& [line, row] : b.rows) {
    auto cols = split_on(row, '\t');
    if (cols.size() != 10) fail(line, "expected 10 columns, found " + std::to_string(cols.size()));
    if (cols[0] != std::to_string(s.tokens.size() + 1)) fail(line, "token ids must run 1..n, found " + cols[0]);
    TokenAnnotation t;
    forms.push_back(cols[1]);
    if (profile.requires_lemma) t.lemma = cols[2];
    t.upos = cols[3];
    t.xpos = cols[4];
    if (profile.requires_dep) t.dep = cols[7];
    bool spaced = true;
    if (cols[9] != "_") {
      for (const auto& item : split_on(cols[9], '|')) {
        if (item == "SpaceAfter=No") {
          spaced = false;
        } else if (item.rfind("NER=", 0) == 0) {
          auto v = item.substr(4);
          auto iob = parse_iob(v.substr(0, 1));
          if (!iob || *iob == Iob::O || (v.size() > 1 && (v[1] != '-' || v.size() == 2)))
            fail(line, "bad NER value " + v);
          t.ent_iob = *iob;
          if (v.size() > 2) t.ent_type = v.substr(2);
        }
      }
    }
    space_after.push_back(spaced);
    s.tokens.push_back(std::move(t));
  }
  if (s.tokens.empty()) fail(b.first_line, "sentence " + s.id + " has no tokens");

  std::vector<Token> spans;
  try {
    spans = reconstruct_offsets(s.text, forms, profile);
  } catch (const OffsetMismatchError& e) {
    fail(b.first_line, "sentence " + s.id + ": " + e.what());
  }
  for (std::size_t k = 0; k < spans.size(); ++k) {
    if (spans[k].trailing_space != space_after[k])
      fail(b.rows[k].first, "SpaceAfter does not match the sentence text");
    s.tokens[k].token = spans[k];
  }
  auto problems = validate_sentence(s, profile);
  if (!problems.empty()) fail(b.first_line, "sentence " + s.id + ": " + problems.front());
  return s;
}

}  // namespace

std::string to_conllu(const std::vector<AnnotatedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    check_field(s, s.id, "sent_id");
    check_field(s, s.text, "text");
    check_field(s, s.period, "period");
    out += "# sent_id = " + s.id + "\n";
    out += "# text = " + s.text + "\n";
    out += "# period = " + s.period + "\n";
    out += "# language = " + std::string(to_string(s.language)) + "\n";
    out += "# provenance = " + provenance_json(s.provenance) + "\n";
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      const auto& t = s.tokens[k];
      check_field(s, t.token.text, "token text");
      if (t.lemma) check_field(s, *t.lemma, "lemma");
      if (t.dep) check_field(s, *t.dep, "dep");
      std::string misc;
      if (!t.token.trailing_space) misc = "SpaceAfter=No";
      if (t.ent_iob != Iob::O) {
        if (!misc.empty()) misc += "|";
        misc += std::string("NER=") + to_char(t.ent_iob);
        if (!t.ent_type.empty()) misc += "-" + t.ent_type;
      }
      out += std::to_string(k + 1) + "\t" + t.token.text + "\t" + t.lemma.value_or("_") + "\t" + t.upos + "\t" +
             t.xpos + "\t_\t_\t" + t.dep.value_or("_") + "\t_\t" + (misc.empty() ? "_" : misc) + "\n";
    }
    out += "\n";
  }
  return out;
}

void export_conllu(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& sentences) {
  write_file(path, to_conllu(sentences));
}

std::vector<AnnotatedSentence> parse_conllu(std::string_view text, std::optional<Language> fallback) {
  std::vector<AnnotatedSentence> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  Block block;
  auto flush = [&] {
    if (block.comments.empty() && block.rows.empty()) return;
    if (block.rows.empty()) fail(block.first_line, "sentence block has no token lines");
    out.push_back(parse_block(block, fallback));
    block = Block{};
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (block.comments.empty() && block.rows.empty()) block.first_line = line_no;
    if (line[0] == '#') {
      if (!block.rows.empty()) fail(line_no, "comment inside a token block");
      auto eq = line.find(" = ");
      if (eq == std::string::npos) continue;
      block.comments.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      continue;
    }
    block.rows.emplace_back(line_no, line);
  }
  flush();
  return out;
}

std::vector<AnnotatedSentence> import_conllu(const std::filesystem::path& path, std::optional<Language> fallback) {
  return parse_conllu(read_file(path), fallback);
}

std::string to_training_json(const std::vector<AnnotatedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["text"] = s.text;
    j["period"] = s.period;
    auto words = nlohmann::ordered_json::array(), spaces = words, pos = words, tag = words, lemma = words,
         ent = words, entities = words;
    std::optional<std::size_t> open_start;
    std::size_t open_end = 0;
    std::string open_type;
    auto close = [&] {
      if (open_start) entities.push_back({*open_start, open_end, open_type});
      open_start.reset();
    };
    for (const auto& t : s.tokens) {
      words.push_back(t.token.text);
      spaces.push_back(t.token.trailing_space);
      pos.push_back(t.upos);
      tag.push_back(t.xpos);
      if (t.lemma) lemma.push_back(*t.lemma);
      std::string e(1, to_char(t.ent_iob));
      if (t.ent_iob != Iob::O && !t.ent_type.empty()) e += "-" + t.ent_type;
      ent.push_back(e);
      if (t.ent_iob == Iob::B) {
        close();
        open_start = t.token.char_start;
        open_type = t.ent_type;
      } else if (t.ent_iob == Iob::O) {
        close();
      }
      open_end = t.token.char_end;
    }
    close();
    j["words"] = std::move(words);
    j["spaces"] = std::move(spaces);
    j["pos"] = std::move(pos);
    j["tag"] = std::move(tag);
    if (!lemma.empty()) j["lemma"] = std::move(lemma);
    j["ent"] = std::move(ent);
    j["entities"] = std::move(entities);
    out += j.dump() + "\n";
  }
  return out;
}

void export_training_json(const std::filesystem::path& path, const std::vector<AnnotatedSentence>& sentences) {
  write_file(path, to_training_json(sentences));
}

}  // namespace histanno
