#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "histanno/corpus.hpp"
#include "sample_oracle.hpp"

using namespace histanno;
using sample_oracle::oracle_take;

namespace {

std::string line(const std::string& id, const std::string& text, const std::string& date) {
  return "{\"id\":\"" + id + "\",\"text\":\"" + text + "\",\"date\":" + date + ",\"source\":\"t\"}\n";
}

CorpusStore store_of(const std::string& jsonl, Granularity g = Granularity::century) {
  std::istringstream in(jsonl);
  return ingest_corpus(in, g);
}

}  // namespace

TEST_SUITE("corpus_store") {

TEST_CASE("century and decade arithmetic") {
  auto s = store_of(line("a1", "Il est passé.", "1642"));
  CHECK(s.records()[0].period == "1600-1700");
  auto d = store_of(line("z1", "...", "1923"), Granularity::decade);
  CHECK(d.records()[0].period == "1920-1929");
  CHECK(period_label(1600, Granularity::century) == "1600-1700");
  CHECK(period_label(1599, Granularity::century) == "1500-1600");
  CHECK(period_label(1930, Granularity::decade) == "1930-1939");
}

TEST_CASE("explicit period labels are accepted when they fit the grammar") {
  auto s = store_of(line("a", "x", "\"1500-1600\"") + line("b", "y", "\"1642\""));
  CHECK(s.record("a").period == "1500-1600");
  CHECK(s.record("b").period == "1600-1700");
  CHECK_THROWS_AS(store_of(line("a", "x", "\"1500-1599\"")), IngestError);
  CHECK_THROWS_AS(store_of(line("a", "x", "\"1500-1600\""), Granularity::decade), IngestError);
}

TEST_CASE("duplicate ids are rejected by name") {
  try {
    store_of(line("a1", "x", "1642") + line("a1", "y", "1700"));
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].line == 2);
    CHECK(e.issues()[0].message.find("a1") != std::string::npos);
  }
}

TEST_CASE("malformed lines are reported with line numbers") {
  std::string input = line("a", "x", "1642") + "not json\n" + line("b", "", "1642") + line("c", "z", "\"soon\"") +
                      "{\"id\":\"d\",\"text\":\"w\"}\n";
  try {
    store_of(input);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    REQUIRE(e.issues().size() == 4);
    CHECK(e.issues()[0].line == 2);
    CHECK(e.issues()[1].line == 3);
    CHECK(e.issues()[1].message.find("empty text") != std::string::npos);
    CHECK(e.issues()[2].message.find("unparsable date") != std::string::npos);
    CHECK(e.issues()[3].line == 5);
  }
}

TEST_CASE("strata partition the store") {
  std::string input;
  for (int i = 0; i < 50; ++i) input += line("r" + std::to_string(i), "t", std::to_string(1500 + i * 9));
  auto s = store_of(input);
  std::multiset<std::string> seen;
  for (const auto& st : s.strata())
    for (const auto& id : st.members) {
      seen.insert(id);
      CHECK(s.record(id).period == st.label);
    }
  CHECK(seen.size() == 50);
  CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == 50);
  // Chronological order.
  for (std::size_t i = 1; i < s.strata().size(); ++i)
    CHECK(*parse_period_label(s.strata()[i - 1].label, Granularity::century) <
          *parse_period_label(s.strata()[i].label, Granularity::century));
}

TEST_CASE("stratified_sample matches the seeded-shuffle-then-take oracle") {
  std::string input;
  std::vector<std::string> a, b;
  for (int i = 0; i < 10; ++i) {
    input += line("a" + std::to_string(i), "t", "1650");
    a.push_back("a" + std::to_string(i));
  }
  for (int i = 0; i < 10; ++i) {
    input += line("b" + std::to_string(i), "t", "1750");
    b.push_back("b" + std::to_string(i));
  }
  auto store = store_of(input);
  auto sample = stratified_sample(store, {4, 7, Granularity::century});
  REQUIRE(sample.size() == 8);
  auto expect_a = oracle_take(a, 7, "1600-1700", 4);
  auto expect_b = oracle_take(b, 7, "1700-1800", 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(sample[i].id == expect_a[i]);
    CHECK(sample[4 + i].id == expect_b[i]);
  }
}

TEST_CASE("sampling is deterministic, balanced and injective") {
  std::string input;
  for (int i = 0; i < 300; ++i) input += line("r" + std::to_string(i), "t", std::to_string(1500 + (i % 5) * 100 + i % 97));
  auto store = store_of(input);
  REQUIRE(store.strata().size() == 5);
  auto first = stratified_sample(store, {20, 99, Granularity::century});
  auto second = stratified_sample(store, {20, 99, Granularity::century});
  CHECK(first == second);
  CHECK(first.size() == 100);
  std::map<std::string, int> per;
  std::set<std::string> ids;
  for (const auto& r : first) {
    per[r.period]++;
    ids.insert(r.id);
  }
  CHECK(ids.size() == 100);
  for (auto& [label, n] : per) CHECK(n == 20);
  auto other = stratified_sample(store, {20, 100, Granularity::century});
  CHECK_FALSE(other == first);
}

TEST_CASE("adding a stratum does not perturb the others") {
  std::string base;
  for (int i = 0; i < 30; ++i) base += line("r" + std::to_string(i), "t", "1650");
  std::string extended = base;
  for (int i = 0; i < 30; ++i) extended += line("q" + std::to_string(i), "t", "1850");
  auto s1 = stratified_sample(store_of(base), {5, 3, Granularity::century});
  auto s2 = stratified_sample(store_of(extended), {5, 3, Granularity::century});
  CHECK(std::equal(s1.begin(), s1.end(), s2.begin()));
}

TEST_CASE("full-size sample: 5 centuries x 11,000") {
  std::string input;
  input.reserve(5 * 11000 * 60);
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 11000; ++i)
      input += line("c" + std::to_string(c) + "_" + std::to_string(i), "s", std::to_string(1500 + c * 100 + i % 100));
  auto store = store_of(input);
  auto sample = stratified_sample(store, {11000, 1, Granularity::century});
  CHECK(sample.size() == 55000);
}

TEST_CASE("sample errors") {
  auto store = store_of(line("a", "x", "1650") + line("b", "y", "1750") + line("c", "z", "1750"));
  CHECK_THROWS_AS(stratified_sample(store, {2, 1, Granularity::century}), ValidationError);
  CHECK_THROWS_AS(stratified_sample(store, {0, 1, Granularity::century}), ValidationError);
  CHECK_THROWS_AS(stratified_sample(store, {1, 1, Granularity::decade}), ValidationError);
}

}  // TEST_SUITE
