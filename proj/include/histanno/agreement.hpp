#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "histanno/corpus.hpp"
#include "histanno/prompt.hpp"
#include "histanno/provider.hpp"
#include "histanno/schema.hpp"

namespace histanno {

struct AgreementPolicy {
  std::vector<double> temperatures;
  // false = relaxed mode: dep is excluded from the comparison.
  bool compare_dep = true;
};

// [0.0] for French, [0.1, 0.7] for Chinese.
AgreementPolicy default_agreement_policy(Language lang);

struct RetryPolicy {
  int max_attempts = 3;
  // Sleep before retry k (1-based) is backoff[min(k-1, size-1)]; empty = no sleep.
  std::vector<std::chrono::milliseconds> backoff;
  // When false an exhausted sentence aborts the batch with ProviderError.
  bool discard_on_exhaustion = true;
};

struct DiscardRecord {
  std::string id;
  std::string stage;  // transport | parse | agreement
  std::string reason;
  std::string period;

  bool operator==(const DiscardRecord&) const = default;
};

std::string discard_to_line(const DiscardRecord& d);

struct AgreementOutcome {
  std::optional<AnnotatedSentence> kept;
  std::optional<DiscardRecord> discard;
  int provider_calls = 0;
};

// Describes the first field where two parses differ, e.g.
// "disagreement at token 3, field lemma"; nullopt when they agree.
std::optional<std::string> first_disagreement(const AnnotatedSentence& a, const AnnotatedSentence& b,
                                              bool compare_dep = true);

struct AnnotateContext {
  const PromptTemplate& prompt;
  const LanguageProfile& profile;
  AgreementPolicy agreement;
  RetryPolicy retry;
  std::string timestamp;  // stamped into provenance
};

// One parse per temperature (with retries); the sentence is kept only when
// every parse is field-wise identical. A single-temperature policy keeps any
// successful parse.
AgreementOutcome annotate_with_agreement(AnnotationProvider& provider, const CorpusRecord& record,
                                         const AnnotateContext& ctx);

struct StratumStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t discarded = 0;
  double keep_rate() const { return total ? static_cast<double>(kept) / static_cast<double>(total) : 0.0; }
};

struct BatchStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t discarded = 0;
  std::size_t provider_calls = 0;
  std::map<std::string, StratumStats> per_stratum;
};

struct BatchResult {
  std::vector<AnnotatedSentence> kept;   // input order
  std::vector<DiscardRecord> discards;   // input order
  BatchStats stats;
};

struct BatchOptions {
  std::size_t concurrency_limit = 1;
  // Called once per discard as it happens, serialized under a lock.
  std::function<void(const DiscardRecord&)> on_discard;
};

// At most concurrency_limit provider calls are in flight. Results are keyed by
// record id, so completion order never changes the output.
BatchResult run_batch(AnnotationProvider& provider, const std::vector<CorpusRecord>& records,
                      const AnnotateContext& ctx, const BatchOptions& options);

}  // namespace histanno
