#include <doctest.h>

#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>

#include "histanno/agreement.hpp"
#include "histanno/mock_provider.hpp"
#include "histanno/response_parser.hpp"
#include "histanno/sentence_io.hpp"
#include "histanno/validate.hpp"
#include "synthetic.hpp"

using namespace histanno;

namespace {

CorpusRecord rec(const std::string& id, const std::string& text, const std::string& period = "1600-1700") {
  CorpusRecord r;
  r.id = id;
  r.text = text;
  r.date = period;
  r.period = period;
  return r;
}

// Replays scripted replies keyed by temperature.
class ScriptedProvider final : public AnnotationProvider {
 public:
  std::map<double, std::string> replies;
  ProviderCapabilities caps{"scripted", true};
  const ProviderCapabilities& capabilities() const override { return caps; }
  std::string complete(const AnnotationRequest& r) override { return replies.at(r.temperature); }
};

const char* kZhReply =
    R"({"text": "他去上海", "tokens": [)"
    R"({"text": "他", "pos": "PRON", "tag": "PN", "ent_iob_": "O", "ent_type_": ""},)"
    R"({"text": "去", "pos": "VERB", "tag": "VV", "ent_iob_": "O", "ent_type_": ""},)"
    R"({"text": "上海", "pos": "PROPN", "tag": "NR", "ent_iob_": "B", "ent_type_": "GPE"}]})";

const char* kFrReply =
    R"({"tokens": [)"
    R"({"text": "Il", "pos": "PRON", "tag": "CLS", "lemma": "il", "dep": "nsubj", "ent": "O"},)"
    R"({"text": "dort", "pos": "VERB", "tag": "V", "lemma": "dormir", "dep": "root", "ent": "O"},)"
    R"({"text": ".", "pos": "PUNCT", "tag": "PONCT", "lemma": ".", "dep": "punct", "ent": "O"}]})";

AnnotateContext context(Language lang, AgreementPolicy policy, RetryPolicy retry = {}) {
  return AnnotateContext{builtin_template(lang), builtin_profile(lang), std::move(policy), std::move(retry),
                         "1970-01-01T00:00:00Z"};
}

ParseError parse_error(std::string_view raw, const CorpusRecord& r, Language lang) {
  auto res = parse_response(raw, r, builtin_profile(lang));
  REQUIRE(std::holds_alternative<ParseError>(res));
  return std::get<ParseError>(res);
}

}  // namespace

TEST_SUITE("llm_driver") {

TEST_CASE("render_prompt substitutes the sentence exactly once") {
  PromptTemplate t(Language::french, "avant {sentence} après");
  CHECK(render_prompt(t, "Il dort.") == "avant Il dort. après");
  auto fr = render_prompt(builtin_template(Language::french), "Il dort.");
  CHECK(fr.find("Required output format") != std::string::npos);
  CHECK(fr.find("Sentence: Il dort.") != std::string::npos);
  CHECK(fr.find("{sentence}") == std::string::npos);
  auto zh = render_prompt(builtin_template(Language::chinese), "他去上海");
  CHECK(zh.find("**Sentence to Process:**\n他去上海") != std::string::npos);
  CHECK(zh.find("Choose exclusively from: `CARDINAL`, `DATE`, `EVENT`") != std::string::npos);
  // A sentence containing the placeholder text is inserted verbatim, not re-expanded.
  CHECK(render_prompt(t, "{sentence}") == "avant {sentence} après");
}

TEST_CASE("template errors") {
  CHECK_THROWS_AS(PromptTemplate(Language::french, "{sentence} and {sentence}"), TemplateError);
  CHECK_THROWS_AS(PromptTemplate(Language::french, "no slot"), TemplateError);
  CHECK_THROWS_AS(render_prompt(builtin_template(Language::french), ""), ValidationError);
}

TEST_CASE("builtin templates are byte-identical to the shipped files") {
  for (auto lang : {Language::french, Language::chinese}) {
    auto path = std::filesystem::path(HISTANNO_DATA_DIR) / "prompts" / (std::string(to_string(lang)) + ".txt");
    CHECK(load_template(lang, path).body() == builtin_template(lang).body());
  }
}

TEST_CASE("extract_json_object") {
  CHECK(extract_json_object("no json") == std::nullopt);
  CHECK(extract_json_object("{\"a\": 1") == std::nullopt);
  CHECK(*extract_json_object("x {\"a\": {\"b\": 2}} y {\"c\": 3}") == "{\"a\": {\"b\": 2}}");
  CHECK(*extract_json_object(R"(pre {"s": "a } brace \" quote {"} post)") == R"({"s": "a } brace \" quote {"})");
}

TEST_CASE("parse_response accepts a well-formed Chinese reply") {
  auto res = parse_response(kZhReply, rec("z1", "他去上海", "1920-1929"), builtin_profile(Language::chinese));
  REQUIRE(std::holds_alternative<AnnotatedSentence>(res));
  const auto& s = std::get<AnnotatedSentence>(res);
  REQUIRE(s.tokens.size() == 3);
  CHECK(s.tokens[2].token.char_start == 2);
  CHECK(s.tokens[2].token.char_end == 4);
  CHECK(s.tokens[2].ent_type == "GPE");
  CHECK(s.period == "1920-1929");
}

TEST_CASE("parse_response strips leading prose via balanced-object extraction") {
  const std::string prefix = "Here is the JSON: ";
  const std::string suffix = "\nHope this helps {not json";
  const std::string raw = prefix + kFrReply + suffix;
  // The fixture is built as prefix + object + suffix, so the object is known.
  CHECK(*extract_json_object(raw) == std::string_view(kFrReply));
  auto res = parse_response(raw, rec("f1", "Il dort."), builtin_profile(Language::french));
  REQUIRE(std::holds_alternative<AnnotatedSentence>(res));
  CHECK(std::get<AnnotatedSentence>(res).tokens[1].lemma == "dormir");
}

TEST_CASE("parse_response error categories") {
  auto fr = rec("f1", "Il dort.");
  std::string missing_lemma = kFrReply;
  missing_lemma.replace(missing_lemma.find(R"("lemma": "il", )"), 15, "");
  CHECK(parse_error(missing_lemma, fr, Language::french).kind == ParseErrorKind::missing_key);

  std::string extra_key = kFrReply;
  extra_key.replace(extra_key.find(R"("ent": "O"})"), 11, R"("ent": "O", "feats": "_"})");
  auto e = parse_error(extra_key, fr, Language::french);
  CHECK(e.kind == ParseErrorKind::missing_key);
  CHECK(e.message.find("unknown key") != std::string::npos);

  std::string bad_tag = kFrReply;
  bad_tag.replace(bad_tag.find(R"("tag": "CLS")"), 12, R"("tag": "NN")");
  e = parse_error(bad_tag, fr, Language::french);
  CHECK(e.kind == ParseErrorKind::tag_violation);
  CHECK(e.message.find("xpos NN not in FTB inventory") != std::string::npos);

  CHECK(parse_error(kFrReply, rec("f1", "Il dormait."), Language::french).kind == ParseErrorKind::offset_mismatch);
  CHECK(parse_error("{\"tokens\": [", fr, Language::french).kind == ParseErrorKind::malformed_json);
  CHECK(parse_error("{\"tokens\": 3}", fr, Language::french).kind == ParseErrorKind::malformed_json);

  auto zh = rec("z1", "他去上海", "1920-1929");
  std::string no_text = kZhReply;
  no_text.replace(no_text.find(R"("text": "他去上海", )"), std::string(R"("text": "他去上海", )").size(), "");
  CHECK(parse_error(no_text, zh, Language::chinese).kind == ParseErrorKind::missing_key);

  std::string orphan = kZhReply;
  orphan.replace(orphan.find(R"("ent_iob_": "B")"), 15, R"("ent_iob_": "I")");
  CHECK(parse_error(orphan, zh, Language::chinese).kind == ParseErrorKind::tag_violation);

  CHECK(parse_error(kZhReply, rec("z1", "她去上海"), Language::chinese).kind == ParseErrorKind::offset_mismatch);
}

TEST_CASE("French entity letters drop any type suffix") {
  std::string typed = kFrReply;
  typed.replace(typed.find(R"("ent": "O"})"), 11, R"("ent": "B-PER"})");
  auto res = parse_response(typed, rec("f1", "Il dort."), builtin_profile(Language::french));
  REQUIRE(std::holds_alternative<AnnotatedSentence>(res));
  CHECK(std::get<AnnotatedSentence>(res).tokens[0].ent_iob == Iob::B);
  CHECK(std::get<AnnotatedSentence>(res).tokens[0].ent_type.empty());
}

TEST_CASE("agreement: identical parses are kept") {
  ScriptedProvider p;
  p.replies = {{0.1, kZhReply}, {0.7, kZhReply}};
  auto out = annotate_with_agreement(p, rec("z1", "他去上海", "1920-1929"),
                                     context(Language::chinese, default_agreement_policy(Language::chinese)));
  REQUIRE(out.kept);
  CHECK(out.kept->provenance.temperatures == std::vector<double>{0.1, 0.7});
  CHECK(out.kept->provenance.model_id == "scripted");
  CHECK(out.provider_calls == 2);
}

TEST_CASE("agreement: one lemma mutation discards with a located reason") {
  ScriptedProvider p;
  std::string mutated = kFrReply;
  mutated.replace(mutated.find("dormir"), 6, "dormire");
  p.replies = {{0.1, kFrReply}, {0.7, mutated}};
  auto out = annotate_with_agreement(p, rec("f1", "Il dort."), context(Language::french, {{0.1, 0.7}, true}));
  CHECK_FALSE(out.kept);
  REQUIRE(out.discard);
  CHECK(out.discard->stage == "agreement");
  CHECK(out.discard->reason == "disagreement at token 1, field lemma");
}

TEST_CASE("agreement: relaxed mode ignores dep") {
  ScriptedProvider p;
  std::string mutated = kFrReply;
  mutated.replace(mutated.find("nsubj"), 5, "obj");
  p.replies = {{0.1, kFrReply}, {0.7, mutated}};
  auto strict = annotate_with_agreement(p, rec("f1", "Il dort."), context(Language::french, {{0.1, 0.7}, true}));
  CHECK_FALSE(strict.kept);
  auto relaxed = annotate_with_agreement(p, rec("f1", "Il dort."), context(Language::french, {{0.1, 0.7}, false}));
  CHECK(relaxed.kept);
}

TEST_CASE("agreement: singleton policy keeps a valid parse without comparison") {
  ScriptedProvider p;
  p.replies = {{0.0, kFrReply}};
  auto out = annotate_with_agreement(p, rec("f1", "Il dort."),
                                     context(Language::french, default_agreement_policy(Language::french)));
  REQUIRE(out.kept);
  CHECK(out.kept->provenance.temperatures == std::vector<double>{0.0});
  CHECK(out.provider_calls == 1);
}

TEST_CASE("agreement decision is symmetric under temperature permutation") {
  MockConfig cfg;
  cfg.language = Language::chinese;
  auto records = synthetic::records(false, {1920, 1930}, 20, 5);
  plan_disagreements(cfg, records, 0.3, 9, {0.1, 0.7});
  MockProvider mock(cfg);
  for (const auto& r : records) {
    auto fwd = annotate_with_agreement(mock, r, context(Language::chinese, {{0.1, 0.7}, true}));
    auto rev = annotate_with_agreement(mock, r, context(Language::chinese, {{0.7, 0.1}, true}));
    CHECK(fwd.kept.has_value() == rev.kept.has_value());
  }
}

TEST_CASE("retries recover from transient failures, then discard") {
  MockConfig cfg;
  cfg.malformed_attempts["a"] = 2;
  cfg.transport_failures["b"] = 2;
  cfg.malformed_attempts["c"] = 3;
  cfg.transport_failures["d"] = 5;
  MockProvider mock(cfg);
  auto ctx = context(Language::french, {{0.0}, true}, RetryPolicy{3, {}, true});
  auto a = annotate_with_agreement(mock, rec("a", "Le roi parle."), ctx);
  CHECK(a.kept);
  CHECK(a.provider_calls == 3);
  CHECK(annotate_with_agreement(mock, rec("b", "Le roi parle."), ctx).kept);
  auto c = annotate_with_agreement(mock, rec("c", "Le roi parle."), ctx);
  REQUIRE(c.discard);
  CHECK(c.discard->stage == "parse");
  CHECK(c.discard->reason.find("malformed-json") != std::string::npos);
  auto d = annotate_with_agreement(mock, rec("d", "Le roi parle."), ctx);
  REQUIRE(d.discard);
  CHECK(d.discard->stage == "transport");

  ctx.retry.discard_on_exhaustion = false;
  CHECK_THROWS_AS(annotate_with_agreement(mock, rec("d", "Le roi parle."), ctx), ProviderError);
}

TEST_CASE("mock output passes every validator") {
  MockProvider fr_mock(MockConfig{Language::french});
  MockProvider zh_mock(MockConfig{Language::chinese});
  for (const auto& r : synthetic::records(true, {1500, 1600, 1700}, 30, 1)) {
    auto out = annotate_with_agreement(fr_mock, r, context(Language::french, {{0.0}, true}));
    REQUIRE_MESSAGE(out.kept, r.text, " ", (out.discard ? out.discard->reason : ""));
    CHECK(validate_sentence(*out.kept, builtin_profile(Language::french)).empty());
  }
  for (const auto& r : synthetic::records(false, {1920, 1930}, 30, 2)) {
    auto out = annotate_with_agreement(zh_mock, r, context(Language::chinese, {{0.1, 0.7}, true}));
    REQUIRE_MESSAGE(out.kept, r.text, " ", (out.discard ? out.discard->reason : ""));
    CHECK(validate_sentence(*out.kept, builtin_profile(Language::chinese)).empty());
  }
}

TEST_CASE("mock recognizes the TIME pattern") {
  MockProvider zh_mock(MockConfig{Language::chinese});
  auto out = annotate_with_agreement(zh_mock, rec("t", "他七點鐘到上海。", "1920-1929"),
                                     context(Language::chinese, {{0.1}, true}));
  REQUIRE(out.kept);
  const auto& toks = out.kept->tokens;
  REQUIRE(toks.size() == 6);
  CHECK(toks[1].token.text == "七");
  CHECK(toks[1].ent_iob == Iob::B);
  CHECK(toks[1].ent_type == "TIME");
  CHECK(toks[2].ent_iob == Iob::I);
}

TEST_CASE("run_batch bookkeeping: 10 records, 3 disagreements") {
  auto records = synthetic::records(false, {1920}, 10, 4);
  MockConfig cfg;
  cfg.language = Language::chinese;
  for (int i : {2, 5, 7}) cfg.perturbations[records[i].id].push_back({0.7, 0, "upos"});
  MockProvider mock(cfg);
  std::vector<DiscardRecord> streamed;
  BatchOptions opts{4, [&](const DiscardRecord& d) { streamed.push_back(d); }};
  auto res = run_batch(mock, records, context(Language::chinese, {{0.1, 0.7}, true}), opts);
  CHECK(res.kept.size() == 7);
  CHECK(res.discards.size() == 3);
  CHECK(streamed.size() == 3);
  CHECK(res.stats.per_stratum.at("1920-1929").kept == 7);
  CHECK(res.discards[0].id == records[2].id);
  CHECK(res.discards[2].id == records[7].id);
}

TEST_CASE("run_batch is independent of the concurrency limit and respects it") {
  auto records = synthetic::records(true, {1500, 1600}, 20, 8);
  MockConfig cfg;
  cfg.latency = std::chrono::milliseconds(2);
  plan_disagreements(cfg, records, 0.25, 3, {0.1, 0.7});
  cfg.malformed_attempts[records[3].id] = 1;
  auto ctx = context(Language::french, {{0.1, 0.7}, true});

  MockProvider serial(cfg);
  auto one = run_batch(serial, records, ctx, {1, {}});
  MockProvider parallel(cfg);
  auto eight = run_batch(parallel, records, ctx, {8, {}});
  CHECK(serial.max_in_flight() == 1);
  CHECK(parallel.max_in_flight() <= 8);
  CHECK(parallel.max_in_flight() >= 2);
  REQUIRE(one.kept.size() == eight.kept.size());
  std::string a, b;
  for (const auto& s : one.kept) a += sentence_to_line(s) + "\n";
  for (const auto& s : eight.kept) b += sentence_to_line(s) + "\n";
  CHECK(a == b);
  CHECK(one.discards == eight.discards);
  CHECK(one.stats.provider_calls == eight.stats.provider_calls);
}

TEST_CASE("run_batch keep-rate per stratum equals the planned disagreement rate") {
  auto records = synthetic::records(false, {1920, 1930}, 100, 21);
  MockConfig cfg;
  cfg.language = Language::chinese;
  plan_disagreements(cfg, records, 0.15, 77, {0.1, 0.7});
  // Expected discard set, computed from the config alone.
  std::set<std::string> expected;
  for (const auto& [id, _] : cfg.perturbations) expected.insert(id);
  MockProvider mock(cfg);
  auto res = run_batch(mock, records, context(Language::chinese, {{0.1, 0.7}, true}), {4, {}});
  std::set<std::string> discarded;
  for (const auto& d : res.discards) discarded.insert(d.id);
  CHECK(discarded == expected);
  REQUIRE(res.stats.per_stratum.size() == 2);
  for (const auto& [period, st] : res.stats.per_stratum) {
    CHECK(st.total == 100);
    CHECK(st.discarded == 15);
    CHECK(st.kept == 85);
    CHECK(st.keep_rate() == doctest::Approx(0.85));
  }
  std::set<std::string> all;
  for (const auto& s : res.kept) all.insert(s.id);
  for (const auto& d : res.discards) CHECK(all.insert(d.id).second);
  CHECK(all.size() == records.size());
}

TEST_CASE("run_batch rejects bad input") {
  MockProvider mock(MockConfig{});
  auto ctx = context(Language::french, {{0.0}, true});
  auto records = synthetic::records(true, {1500}, 3, 1);
  CHECK_THROWS_AS(run_batch(mock, records, ctx, {0, {}}), ValidationError);
  records.push_back(records[0]);
  CHECK_THROWS_AS(run_batch(mock, records, ctx, {2, {}}), ValidationError);
}

TEST_CASE("http provider speaks the chat-completions wire format") {
  httplib::Server server;
  std::string seen_auth, seen_model;
  double seen_temp = -1;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    seen_model = body["model"];
    seen_temp = body["temperature"];
    nlohmann::json reply;
    reply["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", kFrReply}}}}});
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("HISTANNO_TEST_KEY", "secret", 1);
  HttpProviderConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.model_id = "gpt-4o";
  cfg.api_key_env = "HISTANNO_TEST_KEY";
  auto provider = make_http_provider(cfg);
  auto out = annotate_with_agreement(*provider, rec("f1", "Il dort."), context(Language::french, {{0.0}, true}));
  server.stop();
  t.join();
  REQUIRE(out.kept);
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_model == "gpt-4o");
  CHECK(seen_temp == 0.0);
  CHECK(out.kept->provenance.model_id == "gpt-4o");

  cfg.base_url = "https://example.invalid";
  cfg.api_key_env = "HISTANNO_DEFINITELY_UNSET";
  CHECK_THROWS_AS(make_http_provider(cfg), ProviderError);
}

TEST_CASE("http provider transport failures count against retries") {
  HttpProviderConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.timeout = std::chrono::seconds(1);
  auto provider = make_http_provider(cfg);
  auto out = annotate_with_agreement(*provider, rec("f1", "Il dort."),
                                     context(Language::french, {{0.0}, true}, RetryPolicy{2, {}, true}));
  REQUIRE(out.discard);
  CHECK(out.discard->stage == "transport");
  CHECK(out.provider_calls == 2);
}

}  // TEST_SUITE
