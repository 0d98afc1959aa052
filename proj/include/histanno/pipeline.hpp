#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "histanno/corpus.hpp"
#include "histanno/dataset.hpp"
#include "histanno/evaluation.hpp"
#include "histanno/provider.hpp"
#include "histanno/schema.hpp"

namespace histanno {

struct ProviderSettings {
  std::string kind = "mock";  // mock | http
  std::string model_id;       // empty: the provider's default
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::vector<double> temperatures;  // empty: the language default
  bool compare_dep = true;
  std::size_t concurrency = 4;
  int max_attempts = 3;
  std::vector<int> backoff_ms{500, 2000, 8000};
  int timeout_s = 120;
  double mock_disagreement = 0.0;
};

struct PipelineConfig {
  Language language = Language::french;
  std::filesystem::path corpus;
  std::optional<Granularity> granularity;  // default: century for French, decade for Chinese
  std::size_t per_stratum = 0;
  std::uint64_t seed = 0;
  ProviderSettings provider;
  std::optional<std::filesystem::path> prompt;
  std::optional<std::filesystem::path> rules;
  std::optional<std::filesystem::path> mapping;
  bool auto_correct = false;
  SplitSpec split;
  std::optional<AugmentationSpec> augmentation;
  std::string export_format = "conllu";  // conllu | training-json
  std::optional<std::filesystem::path> gold;
  std::optional<std::filesystem::path> pred;
  std::string model_name;
  NerMode ner_mode = NerMode::span;
  bool repair_iob = false;
  std::vector<std::filesystem::path> reports;
  std::filesystem::path out_dir = "out";

  Granularity effective_granularity() const;
  std::vector<double> effective_temperatures() const;
};

// Relative paths in the file resolve against `base_dir`. Unknown keys are errors.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// HISTANNO_SEED, HISTANNO_OUT_DIR, HISTANNO_PROVIDER, HISTANNO_MODEL.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_env(PipelineConfig& config, const EnvLookup& env);
EnvLookup process_env();

// Checks what the named stages need: referenced files exist, temperatures are
// legal, split ratios sum to one.
void validate_config(const PipelineConfig& config, const std::vector<std::string>& stages);

const std::vector<std::string>& stage_names();
std::vector<std::string> parse_stage_list(std::string_view csv);

std::filesystem::path stage_dir(const PipelineConfig& config, const std::string& stage);

struct StageReport {
  std::string stage;
  nlohmann::ordered_json counts;
  std::vector<std::string> warnings;
  std::filesystem::path manifest;
};

// Stages read their inputs from upstream stage directories under out_dir and
// write `<out_dir>/<stage>/manifest.json` listing inputs, outputs (with
// SHA-256), counts, seed and tool version. A missing upstream artifact throws
// MissingArtifactError naming the producing stage. `provider` replaces the
// configured annotation provider when given.
StageReport run_stage(const std::string& stage, const PipelineConfig& config,
                      AnnotationProvider* provider = nullptr);

std::vector<StageReport> run_pipeline(const std::vector<std::string>& stages, const PipelineConfig& config,
                                      AnnotationProvider* provider = nullptr,
                                      const std::function<void(const StageReport&)>& on_stage = {});

std::unique_ptr<AnnotationProvider> make_provider(const PipelineConfig& config,
                                                  const std::vector<CorpusRecord>& records);

}  // namespace histanno
