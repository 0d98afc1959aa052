#include "histanno/agreement.hpp"

#include <atomic>
#include <mutex>
#include <set>
#include <thread>
#include <variant>

#include <json.hpp>

#include "histanno/response_parser.hpp"

namespace histanno {

namespace {

std::string at_token(std::size_t k, const char* field) {
  return "disagreement at token " + std::to_string(k) + ", field " + field;
}

struct RunResult {
  std::optional<AnnotatedSentence> sentence;
  std::string stage;
  std::string reason;
  int calls = 0;
};

RunResult run_one_temperature(AnnotationProvider& provider, const CorpusRecord& record, const std::string& prompt,
                              double temperature, const AnnotateContext& ctx) {
  RunResult out;
  const int attempts = std::max(1, ctx.retry.max_attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0 && !ctx.retry.backoff.empty()) {
      auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), ctx.retry.backoff.size() - 1);
      std::this_thread::sleep_for(ctx.retry.backoff[idx]);
    }
    ++out.calls;
    std::string raw;
    try {
      raw = provider.complete({record.id, record.text, prompt, temperature, attempt});
    } catch (const ProviderError& e) {
      out.stage = "transport";
      out.reason = std::string("temperature ") + nlohmann::json(temperature).dump() + ": " + e.what();
      continue;
    }
    auto parsed = parse_response(raw, record, ctx.profile);
    if (auto* s = std::get_if<AnnotatedSentence>(&parsed)) {
      out.sentence = std::move(*s);
      out.stage.clear();
      out.reason.clear();
      return out;
    }
    const auto& err = std::get<ParseError>(parsed);
    out.stage = "parse";
    out.reason = std::string("temperature ") + nlohmann::json(temperature).dump() + ": " +
                 std::string(to_string(err.kind)) + ": " + err.message;
  }
  out.reason += " (after " + std::to_string(attempts) + " attempts)";
  return out;
}

}  // namespace

AgreementPolicy default_agreement_policy(Language lang) {
  if (lang == Language::french) return {{0.0}, true};
  return {{0.1, 0.7}, true};
}

std::string discard_to_line(const DiscardRecord& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["stage"] = d.stage;
  j["reason"] = d.reason;
  j["period"] = d.period;
  return j.dump();
}

std::optional<std::string> first_disagreement(const AnnotatedSentence& a, const AnnotatedSentence& b,
                                              bool compare_dep) {
  const std::size_t n = std::min(a.tokens.size(), b.tokens.size());
  for (std::size_t k = 0; k < n; ++k) {
    const auto& x = a.tokens[k];
    const auto& y = b.tokens[k];
    if (!(x.token == y.token)) return at_token(k, "text");
    if (x.upos != y.upos) return at_token(k, "upos");
    if (x.xpos != y.xpos) return at_token(k, "xpos");
    if (x.lemma != y.lemma) return at_token(k, "lemma");
    if (compare_dep && x.dep != y.dep) return at_token(k, "dep");
    if (x.ent_iob != y.ent_iob) return at_token(k, "ent_iob");
    if (x.ent_type != y.ent_type) return at_token(k, "ent_type");
  }
  if (a.tokens.size() != b.tokens.size())
    return "disagreement in token count (" + std::to_string(a.tokens.size()) + " vs " +
           std::to_string(b.tokens.size()) + ")";
  return std::nullopt;
}

AgreementOutcome annotate_with_agreement(AnnotationProvider& provider, const CorpusRecord& record,
                                         const AnnotateContext& ctx) {
  if (ctx.agreement.temperatures.empty()) throw ValidationError("agreement policy needs at least one temperature");
  AgreementOutcome out;
  const auto prompt = render_prompt(ctx.prompt, record.text);
  std::vector<AnnotatedSentence> parses;
  for (double t : ctx.agreement.temperatures) {
    auto run = run_one_temperature(provider, record, prompt, t, ctx);
    out.provider_calls += run.calls;
    if (!run.sentence) {
      if (!ctx.retry.discard_on_exhaustion) throw ProviderError("sentence " + record.id + ": " + run.reason);
      out.discard = DiscardRecord{record.id, run.stage, run.reason, record.period};
      return out;
    }
    parses.push_back(std::move(*run.sentence));
  }
  for (std::size_t i = 1; i < parses.size(); ++i) {
    if (auto diff = first_disagreement(parses[0], parses[i], ctx.agreement.compare_dep)) {
      out.discard = DiscardRecord{record.id, "agreement", *diff, record.period};
      return out;
    }
  }
  AnnotatedSentence kept = std::move(parses[0]);
  kept.provenance.model_id = provider.capabilities().model_id;
  kept.provenance.temperatures = ctx.agreement.temperatures;
  kept.provenance.timestamp = ctx.timestamp;
  out.kept = std::move(kept);
  return out;
}

BatchResult run_batch(AnnotationProvider& provider, const std::vector<CorpusRecord>& records,
                      const AnnotateContext& ctx, const BatchOptions& options) {
  if (options.concurrency_limit < 1) throw ValidationError("concurrency limit must be at least 1");
  {
    std::set<std::string> ids;
    for (const auto& r : records)
      if (!ids.insert(r.id).second) throw ValidationError("duplicate record id in batch: " + r.id);
  }

  std::vector<AgreementOutcome> outcomes(records.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        outcomes[i] = annotate_with_agreement(provider, records[i], ctx);
        if (outcomes[i].discard && options.on_discard) {
          std::lock_guard lock(log_mutex);
          options.on_discard(*outcomes[i].discard);
        }
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        stop.store(true);
        return;
      }
    }
  };

  const std::size_t threads = std::min(options.concurrency_limit, std::max<std::size_t>(records.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  BatchResult result;
  result.stats.total = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& st = result.stats.per_stratum[records[i].period];
    ++st.total;
    result.stats.provider_calls += static_cast<std::size_t>(outcomes[i].provider_calls);
    if (outcomes[i].kept) {
      ++st.kept;
      result.kept.push_back(std::move(*outcomes[i].kept));
    } else {
      ++st.discarded;
      result.discards.push_back(std::move(*outcomes[i].discard));
    }
  }
  result.stats.kept = result.kept.size();
  result.stats.discarded = result.discards.size();
  return result;
}

}  // namespace histanno
