#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sys/wait.h>
#include <unistd.h>

#include "histanno/conllu.hpp"
#include "histanno/hash.hpp"
#include "histanno/pipeline.hpp"
#include "histanno/sentence_io.hpp"
#include "synthetic.hpp"

using namespace histanno;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("histanno_pipeline_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

PipelineConfig mock_config(const fs::path& dir, bool french, std::size_t per_period, double disagreement) {
  auto recs = french ? synthetic::records(true, {1500, 1600}, per_period, 5)
                     : synthetic::records(false, {1920, 1930}, per_period, 5);
  write_file(dir / "corpus.jsonl", synthetic::to_jsonl(recs));
  PipelineConfig c;
  c.language = french ? Language::french : Language::chinese;
  c.corpus = dir / "corpus.jsonl";
  c.per_stratum = per_period;
  c.seed = 11;
  c.out_dir = dir / "out";
  c.provider.backoff_ms.clear();
  c.provider.mock_disagreement = disagreement;
  return c;
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = sha256_file(e.path());
  return out;
}

nlohmann::json manifest(const PipelineConfig& c, const std::string& stage) {
  return nlohmann::json::parse(read_file(stage_dir(c, stage) / "manifest.json"));
}

int run_cli(const std::string& args) {
  int status = std::system((std::string(HISTANNO_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::vector<std::string> kFront{"sample", "annotate", "build", "split", "export"};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config file parsing") {
    ScratchDir dir;
    auto j = nlohmann::json::parse(R"({
      "language": "chinese", "corpus": "c.jsonl", "seed": 3, "out_dir": "o",
      "sample": {"per_stratum": 5},
      "provider": {"kind": "mock", "temperatures": [0.2, 0.9], "concurrency": 2},
      "build": {"rules": "r.rules", "auto_correct": true},
      "split": {"train": 0.6, "dev": 0.2, "test": 0.2},
      "augmentation": {"rare_upos": ["INTJ"], "factor": 3},
      "export": {"format": "training-json"},
      "evaluate": {"ner_mode": "token"}
    })");
    auto c = config_from_json(j, dir.path);
    CHECK(c.language == Language::chinese);
    CHECK(c.corpus == dir.path / "c.jsonl");
    CHECK(c.out_dir == dir.path / "o");
    CHECK(c.effective_granularity() == Granularity::decade);
    CHECK(c.effective_temperatures() == std::vector<double>{0.2, 0.9});
    CHECK(c.provider.concurrency == 2);
    CHECK(c.auto_correct);
    CHECK(c.split.dev == doctest::Approx(0.2));
    REQUIRE(c.augmentation);
    CHECK(c.augmentation->factor == 3);
    CHECK(c.export_format == "training-json");
    CHECK(c.ner_mode == NerMode::token);

    CHECK_THROWS_WITH_AS(config_from_json(nlohmann::json::parse(R"({"sed": 1})"), dir.path),
                         "config: unknown key 'sed' in top level", ValidationError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"seed": "x"})"), dir.path), ValidationError);
    CHECK_THROWS_AS(load_config(dir.path / "absent.json"), ValidationError);
  }

  TEST_CASE("defaults follow the language") {
    PipelineConfig c;
    CHECK(c.effective_granularity() == Granularity::century);
    CHECK(c.effective_temperatures() == std::vector<double>{0.0});
    c.language = Language::chinese;
    CHECK(c.effective_temperatures() == std::vector<double>{0.1, 0.7});
  }

  TEST_CASE("environment overrides the file") {
    PipelineConfig c;
    c.seed = 1;
    std::map<std::string, std::string> env{{"HISTANNO_SEED", "99"}, {"HISTANNO_OUT_DIR", "/tmp/x"}};
    auto lookup = [&](const std::string& k) -> std::optional<std::string> {
      auto it = env.find(k);
      if (it == env.end()) return std::nullopt;
      return it->second;
    };
    apply_env(c, lookup);
    CHECK(c.seed == 99);
    CHECK(c.out_dir == "/tmp/x");
    env["HISTANNO_SEED"] = "12abc";
    CHECK_THROWS_AS(apply_env(c, lookup), ValidationError);
  }

  TEST_CASE("stage lists and config validation") {
    CHECK(parse_stage_list("sample, annotate,build") == std::vector<std::string>{"sample", "annotate", "build"});
    CHECK_THROWS_WITH_AS(parse_stage_list("sample,train"), "unknown stage 'train'", ValidationError);
    CHECK_THROWS_AS(parse_stage_list(""), ValidationError);

    ScratchDir dir;
    auto c = mock_config(dir.path, true, 4, 0.0);
    CHECK_NOTHROW(validate_config(c, kFront));
    auto bad = c;
    bad.provider.temperatures = {0.1, 3.0};
    CHECK_THROWS_AS(validate_config(bad, {"annotate"}), ValidationError);
    bad = c;
    bad.split.test = 0.3;
    CHECK_THROWS_WITH_AS(validate_config(bad, {"split"}), "split ratios must sum to 1", ValidationError);
    bad = c;
    bad.rules = dir.path / "missing.rules";
    CHECK_THROWS_AS(validate_config(bad, {"build"}), ValidationError);
    bad = c;
    bad.corpus = dir.path / "missing.jsonl";
    CHECK_THROWS_AS(validate_config(bad, {"sample"}), ValidationError);
  }

  TEST_CASE("stages need their upstream artifacts") {
    ScratchDir dir;
    auto c = mock_config(dir.path, true, 4, 0.0);
    CHECK_THROWS_WITH_AS(run_stage("evaluate", c), doctest::Contains("missing artifact: export"),
                         MissingArtifactError);
    CHECK_THROWS_WITH_AS(run_stage("build", c), doctest::Contains("missing artifact: annotate"),
                         MissingArtifactError);
    CHECK_THROWS_AS(run_stage("report", c), MissingArtifactError);
  }

  TEST_CASE("manifests chain by content hash and reruns are byte-identical") {
    ScratchDir dir;
    auto c = mock_config(dir.path, false, 40, 0.15);
    run_pipeline({"sample", "annotate", "build", "split", "export", "train-handoff"}, c);

    std::map<std::string, std::string> produced;
    for (const auto& stage : {"sample", "annotate", "build", "split", "export", "train-handoff"}) {
      auto m = manifest(c, stage);
      CHECK(m["stage"] == stage);
      CHECK(m["seed"] == 11);
      for (const auto& in : m["inputs"]) {
        std::string p = in["path"];
        if (produced.count(p)) CHECK(produced[p] == in["sha256"]);
      }
      for (const auto& out : m["outputs"]) {
        CHECK(sha256_file(c.out_dir / out["path"].get<std::string>()) == out["sha256"]);
        produced[out["path"].get<std::string>()] = out["sha256"].get<std::string>();
      }
    }
    // each non-initial stage reads something an earlier stage wrote
    for (const auto& stage : {"annotate", "build", "split", "export", "train-handoff"}) {
      bool linked = false;
      auto m = manifest(c, stage);
      for (const auto& in : m["inputs"])
        linked = linked || produced.count(in["path"].get<std::string>()) > 0;
      CHECK_MESSAGE(linked, std::string(stage));
    }
    auto ann = manifest(c, "annotate")["counts"];
    CHECK(ann["kept"].get<int>() + ann["discarded"].get<int>() == 80);
    CHECK(ann["discarded"] == 12);

    auto first = tree_hashes(c.out_dir);
    run_pipeline({"sample", "annotate", "build", "split", "export", "train-handoff"}, c);
    CHECK(tree_hashes(c.out_dir) == first);

    auto other = c;
    other.seed = 12;
    other.out_dir = dir.path / "out2";
    run_pipeline(kFront, other);
    CHECK(sha256_file(other.out_dir / "split" / "test.jsonl") != first["split/test.jsonl"]);
  }

  TEST_CASE("a modified artifact is caught downstream") {
    ScratchDir dir;
    auto c = mock_config(dir.path, true, 5, 0.0);
    run_pipeline({"sample", "annotate"}, c);
    auto path = stage_dir(c, "annotate") / "annotated.jsonl";
    write_file(path, read_file(path) + "\n");
    CHECK_THROWS_WITH_AS(run_stage("build", c), doctest::Contains("rerun annotate"), ValidationError);
  }

  TEST_CASE("build applies fix rules and reports ud flags") {
    ScratchDir dir;
    auto c = mock_config(dir.path, true, 30, 0.0);
    run_pipeline({"sample", "annotate", "build"}, c);
    auto without = manifest(c, "build")["counts"];
    CHECK(without["ud_flags"].get<int>() > 0);  // "pas" tagged PART with xpos ADV
    CHECK(without["fixes"] == 0);

    c.rules = fs::path(HISTANNO_DATA_DIR) / "rules" / "french.rules";
    run_stage("build", c);
    auto with = manifest(c, "build")["counts"];
    CHECK(with["fixes"] == without["ud_flags"]);
    CHECK(with["ud_flags"] == 0);
    for (const auto& s : read_sentences(stage_dir(c, "build") / "built.jsonl"))
      for (const auto& t : s.tokens)
        if (t.token.text == "pas") CHECK(t.upos == "ADV");
  }

  TEST_CASE("export formats and evaluation of exported gold") {
    ScratchDir dir;
    auto c = mock_config(dir.path, false, 30, 0.0);
    run_pipeline(kFront, c);
    auto test = import_conllu(stage_dir(c, "export") / "test.conllu");
    CHECK(test.size() == manifest(c, "split")["counts"]["test"].get<std::size_t>());

    // scoring the gold against itself
    c.pred = stage_dir(c, "export") / "test.conllu";
    c.model_name = "self";
    run_pipeline({"evaluate", "report"}, c);
    auto report = report_from_json(nlohmann::json::parse(read_file(stage_dir(c, "evaluate") / "report.json")));
    CHECK(report.overall.token_f1 == doctest::Approx(100.0));
    CHECK(report.overall.pos_score == doctest::Approx(100.0));
    REQUIRE(report.overall.ner_f1);
    CHECK(*report.overall.ner_f1 == doctest::Approx(100.0));
    auto tables = read_file(stage_dir(c, "report") / "tables.txt");
    CHECK(tables.find("POS_Norm") != std::string::npos);
    CHECK(tables.find("NER_Norm") != std::string::npos);
    auto csv = read_file(stage_dir(c, "report") / "pos_series.csv");
    CHECK(csv == "period,model,pos\n1920-1929,self,100.00\n1930-1939,self,100.00\n");

    c.export_format = "training-json";
    run_stage("export", c);
    CHECK(fs::exists(stage_dir(c, "export") / "train.jsonl"));
    CHECK_FALSE(fs::exists(stage_dir(c, "export") / "train.conllu"));
    run_stage("train-handoff", c);
    auto h = nlohmann::json::parse(read_file(stage_dir(c, "train-handoff") / "handoff.json"));
    CHECK(h["format"] == "training-json");
    CHECK(h["train"]["path"] == "export/train.jsonl");
    auto bare = c;
    bare.pred.reset();
    CHECK_THROWS_WITH_AS(run_stage("evaluate", bare), doctest::Contains("missing artifact: export"),
                         MissingArtifactError);
  }

  TEST_CASE("augmentation adds copies to train only") {
    ScratchDir dir;
    auto c = mock_config(dir.path, true, 40, 0.0);
    c.augmentation = AugmentationSpec{};
    run_pipeline({"sample", "annotate", "build", "split"}, c);
    auto counts = manifest(c, "split")["counts"];
    auto aug = counts["augmentation"];
    CHECK(aug["copies"] == aug["matched"]);
    CHECK(counts["train"] == aug["output"]);
    CHECK(counts["train"].get<int>() + counts["dev"].get<int>() + counts["test"].get<int>() ==
          counts["input"].get<int>() + aug["copies"].get<int>());
    for (const auto& part : {"dev", "test"})
      for (const auto& s : read_sentences(stage_dir(c, "split") / (std::string(part) + ".jsonl")))
        CHECK(s.provenance.augmented_copy == 0);
  }

  TEST_CASE("command line exit codes") {
    ScratchDir dir;
    auto c = mock_config(dir.path, true, 4, 0.0);
    const auto out = " --out-dir " + (dir.path / "cli").string();
    CHECK(run_cli(out + " evaluate") == 2);
    CHECK(run_cli(out + " sample --corpus " + c.corpus.string() + " --per-stratum 400") == 1);
    CHECK(run_cli(out + " --seed 3 sample --corpus " + c.corpus.string() + " --per-stratum 4") == 0);
    CHECK(run_cli(out + " annotate") == 0);
    CHECK(run_cli(out + " split --ratios 0.5,0.5,0.5") == 1);
    CHECK(run_cli(out + " pipeline run --stages build,split,export") == 0);
    CHECK(fs::exists(dir.path / "cli" / "export" / "test.conllu"));
    CHECK(run_cli(out + " --config " + (dir.path / "nope.json").string() + " build") == 1);
    CHECK(::setenv("HISTANNO_PROVIDER", "http", 1) == 0);
    int code = run_cli(out + " annotate");
    ::unsetenv("HISTANNO_PROVIDER");
    // no key in the environment for the default endpoint
    if (!std::getenv("OPENAI_API_KEY")) CHECK(code == 3);
    CHECK(run_cli("--bogus") == 1);
  }
}
