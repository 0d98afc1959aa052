#pragma once

// Random sentence pairs and brute-force set-intersection scorers, written
// without reference to the evaluation module.

#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "histanno/schema.hpp"

namespace eval_oracle {

using Span = std::pair<std::size_t, std::size_t>;

struct Pair {
  histanno::AnnotatedSentence gold;
  histanno::AnnotatedSentence pred;
};

inline std::vector<Span> random_segmentation(std::size_t n_chars, std::size_t max_tokens, std::mt19937_64& gen) {
  // cut points chosen independently, then trimmed to max_tokens
  std::vector<Span> spans;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= n_chars; ++i) {
    bool cut = i == n_chars || gen() % 2 == 0;
    if (cut) {
      spans.emplace_back(start, i);
      start = i;
    }
  }
  while (spans.size() > max_tokens) {
    auto k = gen() % (spans.size() - 1);
    spans[k].second = spans[k + 1].second;
    spans.erase(spans.begin() + static_cast<std::ptrdiff_t>(k) + 1);
  }
  return spans;
}

inline histanno::AnnotatedSentence build(const std::vector<std::string>& chars, const std::vector<Span>& spans,
                                         std::mt19937_64& gen) {
  using namespace histanno;
  static const std::vector<std::string> tags{"NOUN", "VERB", "PROPN"};
  static const std::vector<std::string> types{"GPE", "PERSON"};
  AnnotatedSentence s;
  s.id = "r";
  s.language = Language::chinese;
  s.period = "1920-1929";
  for (const auto& c : chars) s.text += c;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    TokenAnnotation t;
    for (auto i = spans[k].first; i < spans[k].second; ++i) t.token.text += chars[i];
    t.token.char_start = spans[k].first;
    t.token.char_end = spans[k].second;
    t.upos = tags[gen() % tags.size()];
    t.xpos = "NN";
    // valid IOB2 by construction: I only continues an open entity of its type
    auto roll = gen() % 4;
    bool can_continue = k > 0 && s.tokens.back().ent_iob != Iob::O;
    if (roll == 0) {
      t.ent_iob = Iob::B;
      t.ent_type = types[gen() % types.size()];
    } else if (roll == 1 && can_continue) {
      t.ent_iob = Iob::I;
      t.ent_type = s.tokens.back().ent_type;
    }
    s.tokens.push_back(std::move(t));
  }
  return s;
}

// Both sides share the text; segmentations, tags and entities are independent,
// except that with probability 1/3 the prediction reuses the gold segmentation.
inline Pair random_pair(std::mt19937_64& gen, std::size_t max_tokens = 12) {
  static const std::vector<std::string> alphabet{"上", "海", "他", "去", "中", "國", "人", "大"};
  std::size_t n = 1 + gen() % max_tokens;
  std::vector<std::string> chars;
  for (std::size_t i = 0; i < n; ++i) chars.push_back(alphabet[gen() % alphabet.size()]);
  auto gold_spans = random_segmentation(n, max_tokens, gen);
  auto pred_spans = gen() % 3 == 0 ? gold_spans : random_segmentation(n, max_tokens, gen);
  Pair p{build(chars, gold_spans, gen), build(chars, pred_spans, gen)};
  return p;
}

inline double f1(std::size_t correct, std::size_t pred, std::size_t gold) {
  if (pred + gold == 0) return 100.0;
  return 100.0 * static_cast<double>(2 * correct) / static_cast<double>(pred + gold);
}

template <class T>
std::size_t intersection(const std::set<T>& a, const std::set<T>& b) {
  std::size_t n = 0;
  for (const auto& x : a)
    for (const auto& y : b)
      if (x == y) ++n;
  return n;
}

inline std::set<Span> span_set(const histanno::AnnotatedSentence& s) {
  std::set<Span> out;
  for (const auto& t : s.tokens) out.emplace(t.token.char_start, t.token.char_end);
  return out;
}

inline std::set<std::tuple<std::size_t, std::size_t, std::string>> tagged_set(const histanno::AnnotatedSentence& s) {
  std::set<std::tuple<std::size_t, std::size_t, std::string>> out;
  for (const auto& t : s.tokens) out.emplace(t.token.char_start, t.token.char_end, t.upos);
  return out;
}

// Every token range [i, j] that forms a complete B I* run of one type.
inline std::set<std::tuple<std::size_t, std::size_t, std::string>> entity_set(const histanno::AnnotatedSentence& s) {
  using histanno::Iob;
  std::set<std::tuple<std::size_t, std::size_t, std::string>> out;
  const auto& t = s.tokens;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i; j < t.size(); ++j) {
      if (t[i].ent_iob != Iob::B) continue;
      bool ok = true;
      for (std::size_t k = i + 1; k <= j; ++k) ok = ok && t[k].ent_iob == Iob::I && t[k].ent_type == t[i].ent_type;
      bool closed = j + 1 == t.size() || !(t[j + 1].ent_iob == Iob::I && t[j + 1].ent_type == t[i].ent_type);
      if (ok && closed) out.emplace(t[i].token.char_start, t[j].token.char_end, t[i].ent_type);
    }
  }
  return out;
}

inline double token_f1(const Pair& p) {
  auto g = span_set(p.gold), q = span_set(p.pred);
  return f1(intersection(g, q), q.size(), g.size());
}

inline double pos_f1(const Pair& p) {
  auto g = tagged_set(p.gold), q = tagged_set(p.pred);
  return f1(intersection(g, q), q.size(), g.size());
}

inline double ner_f1(const Pair& p) {
  auto g = entity_set(p.gold), q = entity_set(p.pred);
  return f1(intersection(g, q), q.size(), g.size());
}

}  // namespace eval_oracle
