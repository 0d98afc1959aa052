#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "histanno/error.hpp"
#include "histanno/evaluation.hpp"
#include "histanno/schema.hpp"

namespace histanno {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Export requested while sentences are still pending.
class ConflictError : public Error {
 public:
  using Error::Error;
};

struct SampleEntry {
  std::string sentence_id;
  std::string period;
};

struct ReviewSession {
  std::string id;
  Language language = Language::french;
  std::size_t per_stratum = 0;
  std::uint64_t seed = 0;
  std::vector<SampleEntry> sample;  // stratum by stratum, chronological

  // Interleaves strata: first of each stratum, then second of each, ...
  std::vector<std::string> review_order() const;
};

struct SubmitResult {
  bool accepted = false;
  std::vector<std::string> errors;
};

struct GoldExport {
  std::vector<AnnotatedSentence> gold;
  std::vector<GoldAdjudication> adjudications;  // the verdict set each gold sentence came from
  AdjudicationTable summary;
  std::vector<std::string> pending;
};

// Applies the corrections of one verdict set to a sentence.
AnnotatedSentence apply_corrections(const AnnotatedSentence& s, const GoldAdjudication& a);

// Sessions live under `root/<id>/`: session.json, sentences.jsonl (the frozen
// sample) and adjudications.jsonl (append-only submissions).
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root);

  // Draws per_stratum sentences from every period of the test partition.
  // Without an explicit id one is derived from the sample, so the same
  // request always names the same session.
  ReviewSession create_session(const std::vector<AnnotatedSentence>& test_partition, std::size_t per_stratum,
                               std::uint64_t seed, std::optional<std::string> id = std::nullopt);

  ReviewSession session(const std::string& id) const;
  std::vector<std::string> session_ids() const;

  // Session summary: sample, per-sentence status, progress and the next
  // pending sentence in review order.
  nlohmann::ordered_json status(const std::string& id) const;

  // Stored sentence, its status, the profile's inventories and the most
  // recent verdicts.
  nlohmann::ordered_json sentence_payload(const std::string& id, const std::string& sentence_id) const;

  // Verdicts are merged with the reviewer's earlier ones (latest wins per
  // token and field); the merged set must cover every required field.
  SubmitResult submit(const std::string& id, GoldAdjudication adjudication);

  GoldExport export_gold(const std::string& id, bool partial = false) const;

 private:
  struct Loaded;
  Loaded load(const std::string& id) const;
  std::shared_mutex& lock_for(const std::string& id) const;

  std::filesystem::path root_;
  mutable std::mutex locks_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::shared_mutex>> locks_;
};

nlohmann::ordered_json export_to_json(const GoldExport& e);

// HTTP+JSON front end. `default_partition` is used when POST /sessions does
// not carry its own sentences; `static_dir` is mounted at "/" when set.
class ReviewServer {
 public:
  ReviewServer(SessionStore& store, std::vector<AnnotatedSentence> default_partition = {},
               std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ReviewServer();

  int bind_to_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  bool listen_after_bind();  // blocks until stop()
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace histanno
