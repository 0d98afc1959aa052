#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "histanno/corpus.hpp"
#include "histanno/provider.hpp"
#include "histanno/schema.hpp"

namespace histanno {

// A deterministic stand-in for an LLM: a small lexicon plus fallback rules
// produce a plausible annotation, and a perturbation table injects
// per-temperature disagreements and failures for closed-loop tests.
struct Perturbation {
  double temperature = 0.0;
  std::size_t token = 0;   // taken modulo the token count
  std::string field;       // text | upos | xpos | lemma | dep | ent
};

struct MockConfig {
  Language language = Language::french;
  std::string model_id = "mock-annotator";
  std::map<std::string, std::vector<Perturbation>> perturbations;  // by record id
  // Attempts 0..k-1 return a truncated JSON body.
  std::map<std::string, int> malformed_attempts;
  // Attempts 0..k-1 throw ProviderError.
  std::map<std::string, int> transport_failures;
  bool wrap_in_prose = false;
  std::chrono::milliseconds latency{0};
};

// Marks exactly round(rate * n) records of every stratum for a disagreement
// between the first two temperatures. Selection is a seeded shuffle per
// stratum, so the expected discard set is computable from the config alone.
void plan_disagreements(MockConfig& config, const std::vector<CorpusRecord>& records, double rate,
                        std::uint64_t seed, std::vector<double> temperatures);

class MockProvider final : public AnnotationProvider {
 public:
  explicit MockProvider(MockConfig config);

  const ProviderCapabilities& capabilities() const override { return caps_; }
  std::string complete(const AnnotationRequest& request) override;

  // The unperturbed annotation, as token objects in the profile's wire format.
  std::string annotate_json(const std::string& sentence) const;

  std::size_t max_in_flight() const { return max_in_flight_.load(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  MockConfig config_;
  ProviderCapabilities caps_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  std::atomic<std::size_t> calls_{0};
};

}  // namespace histanno
