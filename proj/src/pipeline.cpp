#include "histanno/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>

#include "histanno/agreement.hpp"
#include "histanno/conllu.hpp"
#include "histanno/hash.hpp"
#include "histanno/mock_provider.hpp"
#include "histanno/prompt.hpp"
#include "histanno/rng.hpp"
#include "histanno/sentence_io.hpp"
#include "histanno/validate.hpp"

namespace histanno {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

Granularity PipelineConfig::effective_granularity() const {
  if (granularity) return *granularity;
  return language == Language::french ? Granularity::century : Granularity::decade;
}

std::vector<double> PipelineConfig::effective_temperatures() const {
  if (!provider.temperatures.empty()) return provider.temperatures;
  return default_agreement_policy(language).temperatures;
}

// ---- configuration --------------------------------------------------------

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ValidationError("config: unknown key '" + k + "' in " + where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_path(const nlohmann::json& j, const char* key, const fs::path& base, std::optional<fs::path>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = resolve(base, j.at(key).get<std::string>());
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    check_keys(j,
               {"language", "corpus", "granularity", "seed", "out_dir", "sample", "provider", "prompt", "build",
                "split", "augmentation", "export", "evaluate", "report"},
               "top level");
    if (j.contains("language")) c.language = parse_language(j["language"].get<std::string>());
    if (j.contains("corpus")) c.corpus = resolve(base_dir, j["corpus"].get<std::string>());
    if (j.contains("granularity")) c.granularity = parse_granularity(j["granularity"].get<std::string>());
    read(j, "seed", c.seed);
    if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j["out_dir"].get<std::string>());
    read_path(j, "prompt", base_dir, c.prompt);
    if (j.contains("sample")) {
      const auto& s = j["sample"];
      check_keys(s, {"per_stratum"}, "sample");
      read(s, "per_stratum", c.per_stratum);
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      check_keys(p,
                 {"kind", "model_id", "base_url", "path", "api_key_env", "temperatures", "compare_dep", "concurrency",
                  "max_attempts", "backoff_ms", "timeout_s", "mock_disagreement"},
                 "provider");
      auto& o = c.provider;
      read(p, "kind", o.kind);
      read(p, "model_id", o.model_id);
      read(p, "base_url", o.base_url);
      read(p, "path", o.path);
      read(p, "api_key_env", o.api_key_env);
      read(p, "temperatures", o.temperatures);
      read(p, "compare_dep", o.compare_dep);
      read(p, "concurrency", o.concurrency);
      read(p, "max_attempts", o.max_attempts);
      read(p, "backoff_ms", o.backoff_ms);
      read(p, "timeout_s", o.timeout_s);
      read(p, "mock_disagreement", o.mock_disagreement);
    }
    if (j.contains("build")) {
      const auto& b = j["build"];
      check_keys(b, {"rules", "mapping", "auto_correct"}, "build");
      read_path(b, "rules", base_dir, c.rules);
      read_path(b, "mapping", base_dir, c.mapping);
      read(b, "auto_correct", c.auto_correct);
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      check_keys(s, {"train", "dev", "test"}, "split");
      read(s, "train", c.split.train);
      read(s, "dev", c.split.dev);
      read(s, "test", c.split.test);
    }
    if (j.contains("augmentation") && !j["augmentation"].is_null()) {
      const auto& a = j["augmentation"];
      check_keys(a, {"rare_upos", "rare_xpos", "factor"}, "augmentation");
      AugmentationSpec spec;
      read(a, "rare_upos", spec.rare_upos);
      read(a, "rare_xpos", spec.rare_xpos);
      read(a, "factor", spec.factor);
      c.augmentation = spec;
    }
    if (j.contains("export")) {
      const auto& e = j["export"];
      check_keys(e, {"format"}, "export");
      read(e, "format", c.export_format);
    }
    if (j.contains("evaluate")) {
      const auto& e = j["evaluate"];
      check_keys(e, {"gold", "pred", "model_name", "ner_mode", "repair_iob"}, "evaluate");
      read_path(e, "gold", base_dir, c.gold);
      read_path(e, "pred", base_dir, c.pred);
      read(e, "model_name", c.model_name);
      if (e.contains("ner_mode")) c.ner_mode = parse_ner_mode(e["ner_mode"].get<std::string>());
      read(e, "repair_iob", c.repair_iob);
    }
    if (j.contains("report")) {
      const auto& r = j["report"];
      check_keys(r, {"inputs"}, "report");
      if (r.contains("inputs"))
        for (const auto& p : r["inputs"]) c.reports.push_back(resolve(base_dir, p.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

void apply_env(PipelineConfig& c, const EnvLookup& env) {
  if (auto v = env("HISTANNO_SEED")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
    } catch (const std::logic_error&) {
      throw ValidationError("HISTANNO_SEED is not an integer: " + *v);
    }
  }
  if (auto v = env("HISTANNO_OUT_DIR")) c.out_dir = *v;
  if (auto v = env("HISTANNO_PROVIDER")) c.provider.kind = *v;
  if (auto v = env("HISTANNO_MODEL")) c.provider.model_id = *v;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"sample", "annotate",      "build",    "split",
                                              "export", "train-handoff", "evaluate", "report"};
  return names;
}

std::vector<std::string> parse_stage_list(std::string_view csv) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    if (std::find(stage_names().begin(), stage_names().end(), cur) == stage_names().end())
      throw ValidationError("unknown stage '" + cur + "'");
    out.push_back(cur);
    cur.clear();
  };
  for (char ch : csv) {
    if (ch == ',')
      flush();
    else if (ch != ' ')
      cur += ch;
  }
  flush();
  if (out.empty()) throw ValidationError("no stages given");
  return out;
}

void validate_config(const PipelineConfig& c, const std::vector<std::string>& stages) {
  auto uses = [&](const char* s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };
  auto must_exist = [](const std::optional<fs::path>& p, const char* what) {
    if (p && !fs::exists(*p)) throw ValidationError(std::string(what) + " not found: " + p->string());
  };
  if (uses("sample")) {
    if (c.corpus.empty()) throw ValidationError("sample needs a corpus path");
    if (!fs::exists(c.corpus)) throw ValidationError("corpus not found: " + c.corpus.string());
    if (c.per_stratum == 0) throw ValidationError("sample needs a positive per-stratum count");
  }
  if (uses("annotate")) {
    const auto& p = c.provider;
    if (p.kind != "mock" && p.kind != "http") throw ValidationError("unknown provider kind '" + p.kind + "'");
    auto temps = c.effective_temperatures();
    std::set<double> seen;
    for (double t : temps) {
      if (t < 0.0 || t > 2.0) throw ValidationError("temperature " + std::to_string(t) + " outside [0, 2]");
      if (!seen.insert(t).second) throw ValidationError("temperature listed twice");
    }
    if (p.concurrency == 0) throw ValidationError("concurrency must be at least 1");
    if (p.max_attempts < 1) throw ValidationError("max_attempts must be at least 1");
    if (p.mock_disagreement < 0.0 || p.mock_disagreement > 1.0)
      throw ValidationError("mock_disagreement must lie in [0, 1]");
    must_exist(c.prompt, "prompt template");
  }
  if (uses("build")) {
    must_exist(c.rules, "fix rules");
    must_exist(c.mapping, "mapping table");
  }
  if (uses("split")) {
    validate_split_spec(c.split);
    if (c.augmentation && c.augmentation->factor < 1) throw ValidationError("augmentation factor must be at least 1");
  }
  if (uses("export") && c.export_format != "conllu" && c.export_format != "training-json")
    throw ValidationError("unknown export format '" + c.export_format + "'");
  if (uses("evaluate")) {
    must_exist(c.gold, "gold file");
    must_exist(c.pred, "prediction file");
  }
  if (uses("report"))
    for (const auto& r : c.reports)
      if (!fs::exists(r)) throw ValidationError("report not found: " + r.string());
}

fs::path stage_dir(const PipelineConfig& c, const std::string& stage) { return c.out_dir / stage; }

// ---- stages ---------------------------------------------------------------

namespace {

std::string shown(const PipelineConfig& c, const fs::path& p) {
  auto rel = p.lexically_normal().lexically_relative(c.out_dir.lexically_normal());
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.lexically_normal().generic_string();
}

class Manifest {
 public:
  Manifest(const PipelineConfig& c, std::string stage) : c_(c), stage_(std::move(stage)) {}

  void input(const fs::path& p) { inputs_.push_back(entry(p)); }
  void output(const fs::path& p) { outputs_.push_back(entry(p)); }
  ojson& counts() { return counts_; }
  ojson& parameters() { return params_; }
  std::vector<std::string>& warnings() { return warnings_; }

  StageReport write() const {
    ojson j;
    j["stage"] = stage_;
    j["tool_version"] = HISTANNO_VERSION;
    j["language"] = to_string(c_.language);
    j["seed"] = c_.seed;
    j["parameters"] = params_.is_null() ? ojson::object() : params_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["counts"] = counts_.is_null() ? ojson::object() : counts_;
    j["warnings"] = warnings_;
    auto path = stage_dir(c_, stage_) / "manifest.json";
    write_file(path, j.dump(2) + "\n");
    return {stage_, j["counts"], warnings_, path};
  }

 private:
  ojson entry(const fs::path& p) const { return {{"path", shown(c_, p)}, {"sha256", sha256_file(p)}}; }

  const PipelineConfig& c_;
  std::string stage_;
  ojson inputs_ = ojson::array();
  ojson outputs_ = ojson::array();
  ojson counts_;
  ojson params_;
  std::vector<std::string> warnings_;
};

// An upstream artifact, checked against the manifest that produced it.
fs::path require(const PipelineConfig& c, const std::string& stage, const std::string& file) {
  auto dir = stage_dir(c, stage);
  auto path = dir / file;
  if (!fs::exists(dir / "manifest.json") || !fs::exists(path)) throw MissingArtifactError(stage, shown(c, path));
  auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
  const auto name = shown(c, path);
  for (const auto& o : m.at("outputs")) {
    if (o.at("path") == name) {
      if (o.at("sha256") != sha256_file(path))
        throw ValidationError(name + " changed after stage " + stage + " wrote it; rerun " + stage);
      return path;
    }
  }
  throw MissingArtifactError(stage, name + " is not listed in its manifest");
}

fs::path fresh_stage_dir(const PipelineConfig& c, const std::string& stage) {
  auto dir = stage_dir(c, stage);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  write_file(path, out);
}

std::vector<CorpusRecord> read_records(const fs::path& path, Granularity g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  return ingest_corpus(in, g).records();
}

std::vector<AnnotatedSentence> read_checked(const fs::path& path, Language lang) {
  auto sentences = read_sentences(path);
  for (const auto& s : sentences)
    if (s.language != lang)
      throw ValidationError(path.string() + ": sentence " + s.id + " is " + std::string(to_string(s.language)) +
                            ", the pipeline is configured for " + std::string(to_string(lang)));
  return sentences;
}

std::string provenance_timestamp(const std::string& kind) {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::stoll(epoch));
  } else if (kind != "mock") {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const char* kParts[] = {"train", "dev", "test"};

StageReport stage_sample(const PipelineConfig& c) {
  auto dir = fresh_stage_dir(c, "sample");
  Manifest m(c, "sample");
  auto g = c.effective_granularity();
  auto records = [&] {
    std::ifstream in(c.corpus, std::ios::binary);
    if (!in) throw ValidationError("cannot read corpus " + c.corpus.string());
    auto store = ingest_corpus(in, g);
    ojson strata = ojson::object();
    for (const auto& s : store.strata()) strata[s.label] = s.members.size();
    m.counts()["corpus_records"] = store.records().size();
    m.counts()["corpus_strata"] = std::move(strata);
    return stratified_sample(store, {c.per_stratum, c.seed, g});
  }();
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(record_to_line(r));
  write_lines(dir / "sample.jsonl", lines);
  m.input(c.corpus);
  m.output(dir / "sample.jsonl");
  m.parameters() = {{"granularity", to_string(g)}, {"per_stratum", c.per_stratum}};
  m.counts()["sampled"] = records.size();
  return m.write();
}

StageReport stage_annotate(const PipelineConfig& c, AnnotationProvider* override_provider) {
  auto in = require(c, "sample", "sample.jsonl");
  auto records = read_records(in, c.effective_granularity());
  auto dir = fresh_stage_dir(c, "annotate");
  Manifest m(c, "annotate");

  std::unique_ptr<AnnotationProvider> owned;
  AnnotationProvider* provider = override_provider;
  if (!provider) {
    owned = make_provider(c, records);
    provider = owned.get();
  }
  auto tmpl = c.prompt ? load_template(c.language, *c.prompt) : builtin_template(c.language);
  AgreementPolicy policy{c.effective_temperatures(), c.provider.compare_dep};
  RetryPolicy retry;
  retry.max_attempts = c.provider.max_attempts;
  for (int ms : c.provider.backoff_ms) retry.backoff.emplace_back(ms);
  AnnotateContext ctx{tmpl, builtin_profile(c.language), policy, retry,
                      provenance_timestamp(override_provider ? "mock" : c.provider.kind)};
  auto batch = run_batch(*provider, records, ctx, {c.provider.concurrency, {}});
  if (batch.kept.size() + batch.discards.size() != records.size())
    throw Error("annotate: kept and discarded sentences do not account for the sample");

  write_sentences(dir / "annotated.jsonl", batch.kept);
  std::vector<std::string> discards;
  for (const auto& d : batch.discards) discards.push_back(discard_to_line(d));
  write_lines(dir / "discards.jsonl", discards);

  m.input(in);
  if (c.prompt) m.input(*c.prompt);
  m.output(dir / "annotated.jsonl");
  m.output(dir / "discards.jsonl");
  m.parameters() = {{"provider", override_provider ? "custom" : c.provider.kind},
                    {"model_id", provider->capabilities().model_id},
                    {"temperatures", policy.temperatures},
                    {"compare_dep", policy.compare_dep},
                    {"max_attempts", retry.max_attempts}};
  if (!override_provider && c.provider.kind == "mock") m.parameters()["mock_disagreement"] = c.provider.mock_disagreement;
  auto& counts = m.counts();
  counts["total"] = batch.stats.total;
  counts["kept"] = batch.stats.kept;
  counts["discarded"] = batch.stats.discarded;
  counts["provider_calls"] = batch.stats.provider_calls;
  ojson per = ojson::object();
  for (const auto& [label, s] : batch.stats.per_stratum)
    per[label] = {{"total", s.total}, {"kept", s.kept}, {"discarded", s.discarded}};
  counts["per_stratum"] = std::move(per);
  return m.write();
}

StageReport stage_build(const PipelineConfig& c) {
  auto in = require(c, "annotate", "annotated.jsonl");
  auto sentences = read_checked(in, c.language);
  const auto& profile = builtin_profile(c.language);
  auto rules = c.rules ? load_fix_rules(*c.rules, profile) : std::vector<FixRule>{};
  auto mapping = c.mapping ? MappingTable::load(*c.mapping, profile) : MappingTable::builtin(c.language);
  auto dir = fresh_stage_dir(c, "build");
  Manifest m(c, "build");

  auto changes = apply_fix_rules(sentences, rules);
  std::vector<std::string> flag_lines, rejected_lines;
  std::size_t corrected = 0;
  std::vector<AnnotatedSentence> kept;
  for (auto& s : sentences) {
    for (const auto& f : check_ud_consistency(s, mapping, c.auto_correct)) {
      ojson j{{"sentence_id", f.sentence_id}, {"token", f.token}, {"xpos", f.xpos}, {"upos", f.upos}};
      j["corrected_to"] = f.corrected_to ? ojson(*f.corrected_to) : ojson();
      corrected += f.corrected_to.has_value();
      flag_lines.push_back(j.dump());
    }
    auto problems = validate_sentence(s, profile);
    if (problems.empty()) {
      kept.push_back(std::move(s));
    } else {
      rejected_lines.push_back(ojson{{"id", s.id}, {"problems", problems}}.dump());
    }
  }
  std::vector<std::string> fix_lines;
  for (const auto& ch : changes) fix_lines.push_back(fix_change_to_line(ch));

  write_sentences(dir / "built.jsonl", kept);
  write_lines(dir / "fixes.jsonl", fix_lines);
  write_lines(dir / "ud_flags.jsonl", flag_lines);
  write_lines(dir / "rejected.jsonl", rejected_lines);
  m.input(in);
  if (c.rules) m.input(*c.rules);
  if (c.mapping) m.input(*c.mapping);
  for (const char* f : {"built.jsonl", "fixes.jsonl", "ud_flags.jsonl", "rejected.jsonl"}) m.output(dir / f);
  m.parameters() = {{"rules", c.rules ? shown(c, *c.rules) : "none"},
                    {"mapping", c.mapping ? shown(c, *c.mapping) : "builtin"},
                    {"mapping_version", mapping.version()},
                    {"auto_correct", c.auto_correct}};
  m.counts() = {{"input", sentences.size()},   {"kept", kept.size()},
                {"rejected", rejected_lines.size()}, {"fixes", changes.size()},
                {"ud_flags", flag_lines.size()}, {"ud_corrected", corrected}};
  return m.write();
}

StageReport stage_split(const PipelineConfig& c) {
  auto in = require(c, "build", "built.jsonl");
  auto sentences = read_checked(in, c.language);
  auto spec = c.split;
  spec.seed = c.seed;
  auto result = stratified_split(sentences, spec);
  auto dir = fresh_stage_dir(c, "split");
  Manifest m(c, "split");
  m.warnings() = result.warnings;
  ojson aug;
  if (c.augmentation) {
    AugmentationReport rep;
    result.train = augment_rare(result.train, *c.augmentation, &rep);
    aug = {{"input", rep.input}, {"matched", rep.matched}, {"copies", rep.copies}, {"output", rep.output}};
  }
  write_sentences(dir / "train.jsonl", result.train);
  write_sentences(dir / "dev.jsonl", result.dev);
  write_sentences(dir / "test.jsonl", result.test);
  m.input(in);
  for (const char* p : kParts) m.output(dir / (std::string(p) + ".jsonl"));
  m.parameters() = {{"train", spec.train}, {"dev", spec.dev}, {"test", spec.test}};
  if (c.augmentation)
    m.parameters()["augmentation"] = {{"rare_upos", c.augmentation->rare_upos},
                                      {"rare_xpos", c.augmentation->rare_xpos},
                                      {"factor", c.augmentation->factor}};
  ojson per = ojson::object();
  std::vector<std::pair<std::string, SplitCounts>> strata(result.per_stratum.begin(), result.per_stratum.end());
  std::stable_sort(strata.begin(), strata.end(),
                   [](const auto& a, const auto& b) { return period_start(a.first) < period_start(b.first); });
  for (const auto& [label, n] : strata) per[label] = {{"train", n.train}, {"dev", n.dev}, {"test", n.test}};
  m.counts() = {{"input", sentences.size()},
                {"train", result.train.size()},
                {"dev", result.dev.size()},
                {"test", result.test.size()},
                {"per_stratum", std::move(per)}};
  if (c.augmentation) m.counts()["augmentation"] = std::move(aug);
  return m.write();
}

StageReport stage_export(const PipelineConfig& c) {
  std::vector<std::pair<std::string, std::vector<AnnotatedSentence>>> parts;
  std::vector<fs::path> inputs;
  for (const char* p : kParts) {
    inputs.push_back(require(c, "split", std::string(p) + ".jsonl"));
    parts.emplace_back(p, read_checked(inputs.back(), c.language));
  }
  const auto& profile = builtin_profile(c.language);
  for (const auto& [name, sentences] : parts) {
    for (const auto& s : sentences) {
      auto problems = validate_sentence(s, profile);
      if (!problems.empty()) throw ValidationError("export: " + name + " sentence " + s.id + ": " + problems.front());
    }
  }
  auto dir = fresh_stage_dir(c, "export");
  Manifest m(c, "export");
  for (const auto& p : inputs) m.input(p);
  for (const auto& [name, sentences] : parts) {
    if (c.export_format == "conllu") {
      auto path = dir / (name + ".conllu");
      export_conllu(path, sentences);
      // the written file must read back to the same bytes
      if (to_conllu(import_conllu(path, c.language)) != read_file(path))
        throw ValidationError("export: " + shown(c, path) + " does not round-trip");
      m.output(path);
    } else {
      auto path = dir / (name + ".jsonl");
      export_training_json(path, sentences);
      m.output(path);
    }
    m.counts()[name] = sentences.size();
  }
  m.parameters() = {{"format", c.export_format}};
  return m.write();
}

StageReport stage_handoff(const PipelineConfig& c) {
  auto manifest = nlohmann::json::parse([&] {
    auto p = stage_dir(c, "export") / "manifest.json";
    if (!fs::exists(p)) throw MissingArtifactError("export", shown(c, p));
    return read_file(p);
  }());
  const std::string format = manifest.at("parameters").at("format");
  const std::string ext = format == "conllu" ? ".conllu" : ".jsonl";
  std::vector<fs::path> files;
  for (const char* p : kParts) files.push_back(require(c, "export", std::string(p) + ext));
  auto test = read_checked(require(c, "split", "test.jsonl"), c.language);
  auto dir = fresh_stage_dir(c, "train-handoff");
  Manifest m(c, "train-handoff");

  std::vector<std::string> raw;
  for (const auto& s : test)
    raw.push_back(ojson{{"id", s.id}, {"text", s.text}, {"period", s.period}, {"language", to_string(s.language)}}
                      .dump());
  write_lines(dir / "test_sentences.jsonl", raw);

  ojson h;
  h["language"] = to_string(c.language);
  h["format"] = format;
  for (std::size_t i = 0; i < 3; ++i) h[kParts[i]] = {{"path", shown(c, files[i])}, {"sha256", sha256_file(files[i])}};
  h["predict_input"] = shown(c, dir / "test_sentences.jsonl");
  h["predictions"] = shown(c, c.out_dir / "predictions" / "predictions.conllu");
  h["seed"] = c.seed;
  write_file(dir / "handoff.json", h.dump(2) + "\n");

  for (const auto& f : files) m.input(f);
  m.input(stage_dir(c, "split") / "test.jsonl");
  m.output(dir / "handoff.json");
  m.output(dir / "test_sentences.jsonl");
  m.parameters() = {{"format", format}};
  m.counts() = {{"test_sentences", test.size()}};
  return m.write();
}

StageReport stage_evaluate(const PipelineConfig& c) {
  fs::path gold_path = c.gold ? *c.gold : require(c, "export", "test.conllu");
  fs::path pred_path = c.pred ? *c.pred : c.out_dir / "predictions" / "predictions.conllu";
  if (!fs::exists(pred_path))
    throw MissingArtifactError("predict", shown(c, pred_path) + "; run the trainer's predict step or pass --pred");
  auto gold = import_conllu(gold_path, c.language);
  auto pred = import_conllu(pred_path, c.language);
  const auto& profile = builtin_profile(c.language);
  EvalOptions opts;
  opts.ner_mode = c.ner_mode;
  opts.repair_iob = c.repair_iob;
  auto report = evaluate(gold, pred, profile, opts);
  report.dataset = std::string(to_string(c.language)) + "/" + gold_path.stem().string();
  report.model = c.model_name.empty() ? pred_path.stem().string() : c.model_name;

  auto dir = fresh_stage_dir(c, "evaluate");
  Manifest m(c, "evaluate");
  write_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_file(dir / "scores.txt", render_scores_table({report}) + "\n" + render_period_table({report}));
  write_file(dir / "pos_series.csv", pos_series_csv({report}));
  m.input(gold_path);
  m.input(pred_path);
  for (const char* f : {"report.json", "scores.txt", "pos_series.csv"}) m.output(dir / f);
  m.parameters() = {{"model", report.model}, {"ner_mode", to_string(c.ner_mode)}, {"repair_iob", c.repair_iob}};
  const auto& o = report.overall;
  m.counts() = {{"sentences", o.counts.sentences},
                {"gold_tokens", o.counts.gold_tokens},
                {"pred_tokens", o.counts.pred_tokens},
                {"token_f1", format_pct(o.token_f1)},
                {"pos", format_pct(o.pos_score)},
                {"pos_norm", format_pct(o.pos_norm)}};
  if (o.lemma_accuracy) m.counts()["lemma"] = format_pct(o.lemma_accuracy);
  if (o.ner_f1) m.counts()["ner"] = format_pct(o.ner_f1);
  return m.write();
}

StageReport stage_report(const PipelineConfig& c) {
  std::vector<fs::path> inputs = c.reports;
  if (inputs.empty()) inputs.push_back(require(c, "evaluate", "report.json"));
  std::vector<EvalReport> reports;
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw MissingArtifactError("evaluate", shown(c, p));
    reports.push_back(report_from_json(nlohmann::json::parse(read_file(p))));
  }
  auto dir = fresh_stage_dir(c, "report");
  Manifest m(c, "report");
  std::string text = render_scores_table(reports) + "\n" + render_period_table(reports);
  std::size_t comparisons = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].gold_fingerprint != reports[0].gold_fingerprint) {
      m.warnings().push_back(reports[i].model + " was scored on different gold data than " + reports[0].model +
                             "; no comparison");
      continue;
    }
    text += "\n" + render_comparison(compare_models(reports[i], reports[0]));
    ++comparisons;
  }
  write_file(dir / "tables.txt", text);
  write_file(dir / "pos_series.csv", pos_series_csv(reports));
  for (const auto& p : inputs) m.input(p);
  m.output(dir / "tables.txt");
  m.output(dir / "pos_series.csv");
  m.counts() = {{"reports", reports.size()}, {"comparisons", comparisons}};
  return m.write();
}

}  // namespace

std::unique_ptr<AnnotationProvider> make_provider(const PipelineConfig& c, const std::vector<CorpusRecord>& records) {
  const auto& p = c.provider;
  if (p.kind == "mock") {
    MockConfig mc;
    mc.language = c.language;
    if (!p.model_id.empty()) mc.model_id = p.model_id;
    if (p.mock_disagreement > 0.0)
      plan_disagreements(mc, records, p.mock_disagreement, derive_seed(c.seed, "mock"), c.effective_temperatures());
    return std::make_unique<MockProvider>(std::move(mc));
  }
  if (p.kind == "http") {
    HttpProviderConfig hc;
    hc.base_url = p.base_url;
    hc.path = p.path;
    if (!p.model_id.empty()) hc.model_id = p.model_id;
    hc.api_key_env = p.api_key_env;
    hc.timeout = std::chrono::seconds(p.timeout_s);
    return make_http_provider(hc);
  }
  throw ValidationError("unknown provider kind '" + p.kind + "'");
}

StageReport run_stage(const std::string& stage, const PipelineConfig& c, AnnotationProvider* provider) {
  validate_config(c, {stage});
  fs::create_directories(c.out_dir);
  if (stage == "sample") return stage_sample(c);
  if (stage == "annotate") return stage_annotate(c, provider);
  if (stage == "build") return stage_build(c);
  if (stage == "split") return stage_split(c);
  if (stage == "export") return stage_export(c);
  if (stage == "train-handoff") return stage_handoff(c);
  if (stage == "evaluate") return stage_evaluate(c);
  if (stage == "report") return stage_report(c);
  throw ValidationError("unknown stage '" + stage + "'");
}

std::vector<StageReport> run_pipeline(const std::vector<std::string>& stages, const PipelineConfig& c,
                                      AnnotationProvider* provider,
                                      const std::function<void(const StageReport&)>& on_stage) {
  validate_config(c, stages);
  std::vector<StageReport> out;
  for (const auto& s : stages) {
    out.push_back(run_stage(s, c, provider));
    if (on_stage) on_stage(out.back());
  }
  return out;
}

}  // namespace histanno
