#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "histanno/conllu.hpp"
#include "histanno/pipeline.hpp"
#include "histanno/review.hpp"
#include "histanno/sentence_io.hpp"

using namespace histanno;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, validation = 1, missing_artifact = 2, provider = 3 };

template <class T>
struct Flag {
  T value{};
  CLI::Option* opt = nullptr;
  bool given() const { return opt && opt->count() > 0; }
  void apply(T& target) const {
    if (given()) target = value;
  }
};

template <class T>
Flag<T>& add(CLI::App* app, Flag<T>& f, const std::string& name, const std::string& help) {
  f.opt = app->add_option(name, f.value, help);
  return f;
}

void print_report(const StageReport& r) {
  std::cout << "[" << r.stage << "]";
  for (const auto& [k, v] : r.counts.items()) {
    if (v.is_object()) continue;
    std::cout << " " << k << "=" << (v.is_string() ? v.get<std::string>() : v.dump());
  }
  std::cout << "\n";
  for (const auto& w : r.warnings) std::cerr << "[" << r.stage << "] warning: " << w << "\n";
  std::cout << "[" << r.stage << "] manifest " << r.manifest.generic_string() << "\n";
}

std::vector<AnnotatedSentence> test_partition(const PipelineConfig& c, const std::string& given) {
  fs::path p = given.empty() ? stage_dir(c, "split") / "test.jsonl" : fs::path(given);
  if (!fs::exists(p)) {
    if (given.empty()) throw MissingArtifactError("split", p.generic_string());
    throw ValidationError("partition not found: " + p.string());
  }
  return read_sentences(p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histanno: LLM-bootstrapped annotation of historical corpora"};
  app.set_version_flag("--version", HISTANNO_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  Flag<std::uint64_t> seed;
  Flag<std::string> out_dir, language;
  app.add_option("--config", config_path, "JSON pipeline configuration (or HISTANNO_CONFIG)");
  add(&app, seed, "--seed", "seed for sampling, splitting and the mock provider");
  add(&app, out_dir, "--out-dir", "directory holding one subdirectory per stage");
  add(&app, language, "--language,--profile", "french | chinese");

  // sample
  auto* sample = app.add_subcommand("sample", "draw a stratified sample from a corpus");
  Flag<std::string> corpus, granularity;
  Flag<std::size_t> per_stratum;
  add(sample, corpus, "--corpus", "line-delimited JSON corpus");
  add(sample, granularity, "--granularity", "century | decade");
  add(sample, per_stratum, "--per-stratum", "sentences per period");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "annotate the sample through a provider");
  Flag<std::string> provider_kind, model;
  Flag<std::size_t> concurrency;
  Flag<std::vector<double>> temperatures;
  Flag<double> disagreement;
  add(annotate, provider_kind, "--provider", "mock | http");
  add(annotate, model, "--model", "model id");
  add(annotate, concurrency, "--concurrency", "provider calls in flight");
  add(annotate, temperatures, "--temperatures", "e.g. 0.1,0.7").opt->delimiter(',');
  add(annotate, disagreement, "--mock-disagreement", "share of sentences the mock disagrees on");

  // build
  auto* build = app.add_subcommand("build", "apply fix rules, check UD consistency, validate");
  Flag<std::string> rules, mapping;
  add(build, rules, "--rules", "fix rule file");
  add(build, mapping, "--map", "xpos to upos mapping table");
  bool auto_correct = false;
  build->add_flag("--auto-correct", auto_correct, "rewrite upos where the mapping allows one tag");

  // split
  auto* split = app.add_subcommand("split", "stratified train/dev/test split");
  Flag<std::vector<double>> ratios;
  add(split, ratios, "--ratios", "train,dev,test").opt->delimiter(',')->expected(3);

  // export
  auto* exp = app.add_subcommand("export", "write the split as CoNLL-U or training JSON");
  Flag<std::string> format;
  add(exp, format, "--format", "conllu | training-json").opt->check(CLI::IsMember({"conllu", "training-json"}));

  auto* handoff = app.add_subcommand("train-handoff", "describe the exported corpus for the trainer");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score predictions against gold");
  Flag<std::string> gold, pred, ner_mode, model_name;
  add(eval, gold, "--gold", "gold CoNLL-U (default: the exported test split)");
  add(eval, pred, "--pred", "predicted CoNLL-U");
  add(eval, ner_mode, "--ner-mode", "span | token").opt->check(CLI::IsMember({"span", "token"}));
  add(eval, model_name, "--model-name", "label for the predictions");
  bool repair = false;
  eval->add_flag("--repair-iob", repair, "repair orphan I- tags in predictions");

  // report
  auto* report = app.add_subcommand("report", "render tables and the per-period POS series");
  Flag<std::vector<std::string>> report_inputs;
  add(report, report_inputs, "--reports", "report.json files (default: the evaluate stage's)");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run several stages");
  pipeline->require_subcommand(1);
  auto* run = pipeline->add_subcommand("run", "run stages in order");
  std::string stages = "sample,annotate,build,split,export";
  run->add_option("--stages", stages, "comma-separated stage list")->capture_default_str();

  // review
  auto* review = app.add_subcommand("review", "adjudication sessions");
  review->require_subcommand(1);
  std::string sessions_dir, partition;
  review->add_option("--sessions", sessions_dir, "session store (default: <out-dir>/review)");
  review->add_option("--partition", partition, "test partition JSONL (default: the split stage's)");
  auto* serve = review->add_subcommand("serve", "serve the review API");
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--static", static_dir, "directory served at /");
  auto* create = review->add_subcommand("create", "draw a review sample");
  std::size_t review_per_stratum = 20;
  std::string session_id;
  create->add_option("--per-stratum", review_per_stratum)->capture_default_str();
  create->add_option("--session-id", session_id);
  auto* rexport = review->add_subcommand("export", "write adjudicated gold");
  bool partial = false;
  rexport->add_option("--session-id", session_id)->required();
  rexport->add_flag("--partial", partial, "export even if sentences are pending");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? Exit::ok : Exit::validation;
  }

  try {
    // file < environment < flags
    PipelineConfig c;
    if (config_path.empty())
      if (auto env = process_env()("HISTANNO_CONFIG")) config_path = *env;
    if (!config_path.empty()) c = load_config(config_path);
    apply_env(c, process_env());
    seed.apply(c.seed);
    if (out_dir.given()) c.out_dir = out_dir.value;
    if (language.given()) c.language = parse_language(language.value);
    if (corpus.given()) c.corpus = corpus.value;
    if (granularity.given()) c.granularity = parse_granularity(granularity.value);
    per_stratum.apply(c.per_stratum);
    provider_kind.apply(c.provider.kind);
    model.apply(c.provider.model_id);
    concurrency.apply(c.provider.concurrency);
    temperatures.apply(c.provider.temperatures);
    disagreement.apply(c.provider.mock_disagreement);
    if (rules.given()) c.rules = rules.value;
    if (mapping.given()) c.mapping = mapping.value;
    if (auto_correct) c.auto_correct = true;
    if (ratios.given()) {
      c.split.train = ratios.value[0];
      c.split.dev = ratios.value[1];
      c.split.test = ratios.value[2];
    }
    format.apply(c.export_format);
    if (gold.given()) c.gold = gold.value;
    if (pred.given()) c.pred = pred.value;
    if (ner_mode.given()) c.ner_mode = parse_ner_mode(ner_mode.value);
    model_name.apply(c.model_name);
    if (repair) c.repair_iob = true;
    if (report_inputs.given()) c.reports.assign(report_inputs.value.begin(), report_inputs.value.end());

    for (auto* sub : {sample, annotate, build, split, exp, handoff, eval, report}) {
      if (sub->parsed()) {
        print_report(run_stage(sub->get_name(), c));
        return Exit::ok;
      }
    }
    if (run->parsed()) {
      run_pipeline(parse_stage_list(stages), c, nullptr, print_report);
      return Exit::ok;
    }

    SessionStore store(sessions_dir.empty() ? c.out_dir / "review" : fs::path(sessions_dir));
    if (create->parsed()) {
      auto s = store.create_session(test_partition(c, partition), review_per_stratum, c.seed,
                                    session_id.empty() ? std::nullopt : std::optional<std::string>(session_id));
      std::cout << "session " << s.id << ": " << s.sample.size() << " sentences\n";
    } else if (serve->parsed()) {
      std::vector<AnnotatedSentence> sentences;
      if (!partition.empty() || fs::exists(stage_dir(c, "split") / "test.jsonl"))
        sentences = test_partition(c, partition);
      ReviewServer server(store, std::move(sentences),
                          static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
      if (!server.bind(host, port)) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
      std::cout << "review service on http://" << host << ":" << port << std::endl;
      server.listen_after_bind();
    } else if (rexport->parsed()) {
      auto e = store.export_gold(session_id, partial);
      auto dir = c.out_dir / "review" / "exports" / session_id;
      fs::create_directories(dir);
      write_sentences(dir / "gold.jsonl", e.gold);
      export_conllu(dir / "gold.conllu", e.gold);
      write_file(dir / "export.json", export_to_json(e).dump(2) + "\n");
      write_file(dir / "summary.txt", render_adjudication_table(e.summary));
      std::cout << render_adjudication_table(e.summary);
      for (const auto& w : e.summary.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "gold written to " << dir.generic_string() << "\n";
    }
    return Exit::ok;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::missing_artifact;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return Exit::provider;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::validation;
  }
}
