#include "histanno/review.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <httplib.h>

#include "histanno/corpus.hpp"
#include "histanno/dataset.hpp"
#include "histanno/hash.hpp"
#include "histanno/sentence_io.hpp"
#include "histanno/validate.hpp"

namespace histanno {

namespace {

using Cell = std::pair<std::size_t, std::string>;  // token, field

void check_session_id(const std::string& id) {
  static const std::regex ok("[A-Za-z0-9_-][A-Za-z0-9_.-]*");
  if (!std::regex_match(id, ok)) throw ValidationError("invalid session id '" + id + "'");
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<EntityTag> parse_ner_value(const std::string& v, const LanguageProfile& profile) {
  auto iob = parse_iob(v.substr(0, 1));
  if (!iob) return std::nullopt;
  EntityTag t{*iob, ""};
  if (v.size() == 1) {
    if (*iob != Iob::O && profile.typed_entities()) return std::nullopt;
    return t;
  }
  if (*iob == Iob::O || v[1] != '-' || !profile.typed_entities()) return std::nullopt;
  t.type = v.substr(2);
  if (!profile.has_ner_type(t.type)) return std::nullopt;
  return t;
}

std::size_t field_rank(const std::vector<std::string>& fields, const std::string& f) {
  return static_cast<std::size_t>(std::find(fields.begin(), fields.end(), f) - fields.begin());
}

void sort_verdicts(std::vector<FieldVerdict>& v, const std::vector<std::string>& fields) {
  std::sort(v.begin(), v.end(), [&](const FieldVerdict& a, const FieldVerdict& b) {
    return std::make_pair(a.token, field_rank(fields, a.field)) < std::make_pair(b.token, field_rank(fields, b.field));
  });
}

nlohmann::ordered_json inventories(const LanguageProfile& p) {
  nlohmann::ordered_json j;
  j["upos"] = p.upos_inventory;
  j["xpos"] = p.xpos_inventory;
  j["ner"] = p.ner_inventory;
  return j;
}

}  // namespace

std::vector<std::string> ReviewSession::review_order() const {
  std::vector<std::vector<std::string>> strata;
  std::string last;
  for (const auto& e : sample) {
    if (strata.empty() || e.period != last) strata.emplace_back();
    strata.back().push_back(e.sentence_id);
    last = e.period;
  }
  std::vector<std::string> out;
  for (std::size_t k = 0;; ++k) {
    bool any = false;
    for (const auto& s : strata) {
      if (k < s.size()) {
        out.push_back(s[k]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

AnnotatedSentence apply_corrections(const AnnotatedSentence& s, const GoldAdjudication& a) {
  auto out = s;
  const auto& profile = builtin_profile(s.language);
  for (const auto& v : a.verdicts) {
    if (!v.correction) continue;
    if (v.token >= out.tokens.size()) throw ValidationError("correction names token " + std::to_string(v.token));
    auto& t = out.tokens[v.token];
    if (v.field == "upos") {
      t.upos = *v.correction;
    } else if (v.field == "lemma") {
      t.lemma = *v.correction;
    } else if (v.field == "ner") {
      auto tag = parse_ner_value(*v.correction, profile);
      if (!tag) throw ValidationError("bad NER correction '" + *v.correction + "'");
      t.ent_iob = tag->iob;
      t.ent_type = tag->type;
    }
  }
  return out;
}

struct SessionStore::Loaded {
  ReviewSession session;
  std::vector<AnnotatedSentence> sentences;  // sample order
  std::vector<GoldAdjudication> log;         // submission order

  const AnnotatedSentence& sentence(const std::string& sid) const {
    for (const auto& s : sentences)
      if (s.id == sid) return s;
    throw NotFoundError("sentence " + sid + " is not in session " + session.id);
  }

  // reviewer -> merged verdicts, plus the log index of the reviewer's last submission
  struct Merged {
    std::map<Cell, FieldVerdict> cells;
    std::size_t last = 0;
    std::string timestamp;
  };

  std::map<std::string, Merged> merged_for(const std::string& sid) const {
    std::map<std::string, Merged> out;
    for (std::size_t i = 0; i < log.size(); ++i) {
      if (log[i].sentence_id != sid) continue;
      auto& m = out[log[i].reviewer];
      for (const auto& v : log[i].verdicts) m.cells[{v.token, v.field}] = v;
      m.last = i;
      m.timestamp = log[i].timestamp;
    }
    return out;
  }

  // The verdict set of whichever reviewer submitted last.
  std::optional<GoldAdjudication> current(const std::string& sid) const {
    auto merged = merged_for(sid);
    if (merged.empty()) return std::nullopt;
    auto best = std::max_element(merged.begin(), merged.end(),
                                 [](const auto& a, const auto& b) { return a.second.last < b.second.last; });
    GoldAdjudication g{sid, best->first, best->second.timestamp, {}};
    for (const auto& [_, v] : best->second.cells) g.verdicts.push_back(v);
    sort_verdicts(g.verdicts, adjudication_fields(builtin_profile(session.language)));
    return g;
  }
};

SessionStore::SessionStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::shared_mutex& SessionStore::lock_for(const std::string& id) const {
  std::lock_guard g(locks_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::shared_mutex>();
  return *slot;
}

SessionStore::Loaded SessionStore::load(const std::string& id) const {
  check_session_id(id);
  auto dir = root_ / id;
  if (!std::filesystem::exists(dir / "session.json")) throw NotFoundError("no session " + id);
  Loaded l;
  auto j = nlohmann::json::parse(read_file(dir / "session.json"));
  l.session.id = j.at("id").get<std::string>();
  l.session.language = parse_language(j.at("language").get<std::string>());
  l.session.per_stratum = j.at("per_stratum").get<std::size_t>();
  l.session.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("sample"))
    l.session.sample.push_back({e.at("sentence_id").get<std::string>(), e.at("period").get<std::string>()});
  l.sentences = read_sentences(dir / "sentences.jsonl");
  if (std::filesystem::exists(dir / "adjudications.jsonl")) {
    std::ifstream in(dir / "adjudications.jsonl");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) l.log.push_back(adjudication_from_json(nlohmann::json::parse(line)));
  }
  return l;
}

ReviewSession SessionStore::create_session(const std::vector<AnnotatedSentence>& test_partition,
                                           std::size_t per_stratum, std::uint64_t seed, std::optional<std::string> id) {
  if (test_partition.empty()) throw ValidationError("test partition is empty");
  const auto lang = test_partition.front().language;
  std::map<std::string, const AnnotatedSentence*> by_id;
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& s : test_partition) {
    if (s.language != lang) throw ValidationError("test partition mixes languages");
    if (!by_id.emplace(s.id, &s).second) throw ValidationError("duplicate sentence id " + s.id);
    members[s.period].push_back(s.id);
  }
  std::vector<std::pair<std::string, std::vector<std::string>>> groups(members.begin(), members.end());
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return period_start(a.first) < period_start(b.first); });
  auto picked = sample_groups(groups, per_stratum, seed);

  ReviewSession session;
  session.language = lang;
  session.per_stratum = per_stratum;
  session.seed = seed;
  std::string key = std::string(to_string(lang)) + "|" + std::to_string(per_stratum) + "|" + std::to_string(seed);
  for (const auto& sid : picked) {
    session.sample.push_back({sid, by_id.at(sid)->period});
    key += "|" + sid;
  }
  session.id = id ? *id : "rs-" + sha256_hex(key).substr(0, 12);
  check_session_id(session.id);

  std::unique_lock guard(lock_for(session.id));
  auto dir = root_ / session.id;
  if (std::filesystem::exists(dir / "session.json")) {
    auto existing = load(session.id).session;
    bool same = existing.language == session.language && existing.sample.size() == session.sample.size() &&
                std::equal(existing.sample.begin(), existing.sample.end(), session.sample.begin(),
                           [](const SampleEntry& a, const SampleEntry& b) { return a.sentence_id == b.sentence_id; });
    if (!same) throw ConflictError("session " + session.id + " already exists with a different sample");
    return existing;
  }
  nlohmann::ordered_json j;
  j["id"] = session.id;
  j["language"] = to_string(lang);
  j["per_stratum"] = per_stratum;
  j["seed"] = seed;
  auto sample = nlohmann::ordered_json::array();
  for (const auto& e : session.sample) sample.push_back({{"sentence_id", e.sentence_id}, {"period", e.period}});
  j["sample"] = std::move(sample);
  std::vector<AnnotatedSentence> frozen;
  for (const auto& e : session.sample) frozen.push_back(*by_id.at(e.sentence_id));
  write_sentences(dir / "sentences.jsonl", frozen);
  write_file(dir / "adjudications.jsonl", "");
  write_file(dir / "session.json", j.dump(2) + "\n");
  return session;
}

ReviewSession SessionStore::session(const std::string& id) const {
  std::shared_lock guard(lock_for(id));
  return load(id).session;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(root_))
    if (std::filesystem::exists(e.path() / "session.json")) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::ordered_json SessionStore::status(const std::string& id) const {
  std::shared_lock guard(lock_for(id));
  auto l = load(id);
  nlohmann::ordered_json j;
  j["id"] = l.session.id;
  j["language"] = to_string(l.session.language);
  j["per_stratum"] = l.session.per_stratum;
  j["seed"] = l.session.seed;
  std::set<std::string> done;
  for (const auto& a : l.log) done.insert(a.sentence_id);
  auto sentences = nlohmann::ordered_json::array();
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> progress;
  for (const auto& e : l.session.sample) {
    bool adjudicated = done.count(e.sentence_id) > 0;
    sentences.push_back({{"id", e.sentence_id}, {"period", e.period}, {"status", adjudicated ? "adjudicated" : "pending"}});
    if (progress.empty() || progress.back().first != e.period) progress.push_back({e.period, {0, 0}});
    progress.back().second.first += 1;
    progress.back().second.second += adjudicated;
  }
  j["total"] = l.session.sample.size();
  j["adjudicated"] = done.size();
  j["pending"] = l.session.sample.size() - done.size();
  auto per = nlohmann::ordered_json::array();
  for (const auto& [p, c] : progress) per.push_back({{"period", p}, {"total", c.first}, {"adjudicated", c.second}});
  j["progress"] = std::move(per);
  j["sentences"] = std::move(sentences);
  auto order = l.session.review_order();
  j["order"] = order;
  j["next"] = nullptr;
  for (const auto& sid : order) {
    if (!done.count(sid)) {
      j["next"] = sid;
      break;
    }
  }
  return j;
}

nlohmann::ordered_json SessionStore::sentence_payload(const std::string& id, const std::string& sentence_id) const {
  std::shared_lock guard(lock_for(id));
  auto l = load(id);
  const auto& s = l.sentence(sentence_id);
  const auto& profile = builtin_profile(s.language);
  auto current = l.current(sentence_id);
  nlohmann::ordered_json j;
  j["session"] = id;
  j["status"] = current ? "adjudicated" : "pending";
  j["fields"] = adjudication_fields(profile);
  j["inventories"] = inventories(profile);
  j["sentence"] = sentence_to_json(s);
  j["verdicts"] = current ? adjudication_to_json(*current) : nlohmann::ordered_json();
  return j;
}

SubmitResult SessionStore::submit(const std::string& id, GoldAdjudication a) {
  std::unique_lock guard(lock_for(id));
  auto l = load(id);
  const auto& s = l.sentence(a.sentence_id);
  const auto& profile = builtin_profile(s.language);
  const auto fields = adjudication_fields(profile);
  if (a.reviewer.empty()) a.reviewer = "reviewer";
  if (a.timestamp.empty()) a.timestamp = utc_now();

  SubmitResult r;
  std::set<Cell> seen;
  for (const auto& v : a.verdicts) {
    const std::string where = "token " + std::to_string(v.token) + " " + v.field;
    if (v.token >= s.tokens.size()) {
      r.errors.push_back(where + ": token out of range");
      continue;
    }
    if (field_rank(fields, v.field) == fields.size()) {
      r.errors.push_back(where + ": field is not adjudicated for " + std::string(to_string(s.language)));
      continue;
    }
    if (!seen.insert({v.token, v.field}).second) r.errors.push_back(where + ": duplicate verdict");
    if (!v.correction) continue;
    if (v.verdict != Verdict::error) {
      r.errors.push_back(where + ": a correction needs an error verdict");
    } else if (v.field == "upos" && !profile.has_upos(*v.correction)) {
      r.errors.push_back(where + ": correction " + *v.correction + " not in UPOS inventory");
    } else if (v.field == "lemma" &&
               (v.correction->empty() || v.correction->find_first_of(" \t\r\n") != std::string::npos)) {
      r.errors.push_back(where + ": lemma correction must be one non-empty word");
    } else if (v.field == "ner" && !parse_ner_value(*v.correction, profile)) {
      r.errors.push_back(where + ": correction " + *v.correction + " not in NER inventory");
    }
  }
  if (!r.errors.empty()) return r;

  auto merged = l.merged_for(s.id)[a.reviewer].cells;
  for (const auto& v : a.verdicts) merged[{v.token, v.field}] = v;
  std::vector<std::string> missing;
  for (std::size_t k = 0; k < s.tokens.size(); ++k)
    for (const auto& f : fields)
      if (!merged.count({k, f})) missing.push_back(std::to_string(k) + ":" + f);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 8) list += ", ...";
    r.errors.push_back("missing verdicts: " + list);
    return r;
  }
  GoldAdjudication full{s.id, a.reviewer, a.timestamp, {}};
  for (const auto& [_, v] : merged) full.verdicts.push_back(v);
  for (const auto& problem : validate_sentence(apply_corrections(s, full), profile))
    r.errors.push_back("corrected sentence: " + problem);
  if (!r.errors.empty()) return r;

  sort_verdicts(a.verdicts, fields);
  std::ofstream out(root_ / id / "adjudications.jsonl", std::ios::app | std::ios::binary);
  out << adjudication_to_json(a).dump() << "\n";
  if (!out) throw Error("cannot append to adjudication log of session " + id);
  r.accepted = true;
  return r;
}

GoldExport SessionStore::export_gold(const std::string& id, bool partial) const {
  std::shared_lock guard(lock_for(id));
  auto l = load(id);
  GoldExport e;
  for (const auto& s : l.sentences) {
    auto current = l.current(s.id);
    if (!current) {
      e.pending.push_back(s.id);
      continue;
    }
    e.gold.push_back(apply_corrections(s, *current));
    e.adjudications.push_back(std::move(*current));
  }
  if (!e.pending.empty() && !partial)
    throw ConflictError(std::to_string(e.pending.size()) + " sentence(s) still pending; request a partial export to proceed");
  e.summary = adjudication_accuracy(l.sentences, e.adjudications, builtin_profile(l.session.language));
  return e;
}

nlohmann::ordered_json export_to_json(const GoldExport& e) {
  nlohmann::ordered_json j;
  auto gold = nlohmann::ordered_json::array();
  for (const auto& s : e.gold) gold.push_back(sentence_to_json(s));
  j["gold"] = std::move(gold);
  auto adj = nlohmann::ordered_json::array();
  for (const auto& a : e.adjudications) adj.push_back(adjudication_to_json(a));
  j["adjudications"] = std::move(adj);
  j["summary"] = adjudication_table_to_json(e.summary);
  j["pending"] = e.pending;
  return j;
}

// ---- HTTP -----------------------------------------------------------------

struct ReviewServer::Impl {
  SessionStore& store;
  std::vector<AnnotatedSentence> partition;
  httplib::Server server;

  Impl(SessionStore& s, std::vector<AnnotatedSentence> p) : store(s), partition(std::move(p)) {}
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const NotFoundError& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const ConflictError& e) {
    send_json(res, 409, {{"error", e.what()}});
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, {{"error", std::string("bad JSON: ") + e.what()}});
  } catch (const ValidationError& e) {
    send_json(res, 422, {{"error", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

ReviewServer::ReviewServer(SessionStore& store, std::vector<AnnotatedSentence> default_partition,
                           std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(store, std::move(default_partition))) {
  auto& srv = impl_->server;
  auto* impl = impl_.get();
  if (static_dir) srv.set_mount_point("/", static_dir->string());

  srv.Post("/sessions", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
      std::vector<AnnotatedSentence> sentences;
      if (body.contains("sentences")) {
        for (const auto& s : body["sentences"]) sentences.push_back(sentence_from_json(s));
      } else {
        sentences = impl->partition;
      }
      std::optional<std::string> id;
      if (body.contains("id")) id = body["id"].get<std::string>();
      auto session = impl->store.create_session(sentences, body.value("per_stratum", std::size_t{20}),
                                                body.value("seed", std::uint64_t{0}), id);
      send_json(res, 201, impl->store.status(session.id));
    });
  });
  srv.Get("/sessions", [impl](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, {{"sessions", impl->store.session_ids()}}); });
  });
  srv.Get(R"(/sessions/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, impl->store.status(req.matches[1])); });
  });
  srv.Get(R"(/sessions/([^/]+)/sentences/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, impl->store.sentence_payload(req.matches[1], req.matches[2])); });
  });
  srv.Post(R"(/sessions/([^/]+)/adjudications)", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto a = adjudication_from_json(nlohmann::json::parse(req.body));
      auto sid = a.sentence_id;
      auto r = impl->store.submit(req.matches[1], std::move(a));
      nlohmann::ordered_json out;
      out["accepted"] = r.accepted;
      out["sentence_id"] = sid;
      out["errors"] = r.errors;
      send_json(res, r.accepted ? 200 : 422, out);
    });
  });
  srv.Get(R"(/sessions/([^/]+)/export)", [impl](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto partial = req.get_param_value("partial");
      bool allow = partial == "1" || partial == "true";
      send_json(res, 200, export_to_json(impl->store.export_gold(req.matches[1], allow)));
    });
  });
}

ReviewServer::~ReviewServer() = default;

int ReviewServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool ReviewServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
bool ReviewServer::listen_after_bind() { return impl_->server.listen_after_bind(); }
void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }
void ReviewServer::stop() { impl_->server.stop(); }

}  // namespace histanno
