/*
 * Copyright 2026 The sentinsert Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/problem.hpp"
#include "sentinsert/rng.hpp"

// Sentence splitting, abstract filtering and insertion-problem synthesis.
namespace sentinsert {

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Closing characters allowed between the terminal punctuation and the space.
inline std::size_t skip_closers(std::string_view s, std::size_t i) {
  while (i < s.size()) {
    if (s[i] == '"' || s[i] == '\'' || s[i] == ')' || s[i] == ']') {
      ++i;
    } else if (s.substr(i, 3) == "\xE2\x80\x9D" || s.substr(i, 3) == "\xE2\x80\x99") {  // ” ’
      i += 3;
    } else {
      break;
    }
  }
  return i;
}

inline bool starts_sentence(std::string_view s, std::size_t i) {
  if (i >= s.size()) return false;
  const unsigned char c = static_cast<unsigned char>(s[i]);
  if (std::isupper(c) || c == '"' || c == '\'' || c == '(' || c == '[') return true;
  return s.substr(i, 3) == "\xE2\x80\x9C" || s.substr(i, 3) == "\xE2\x80\x98";  // “ ‘
}

inline const std::set<std::string>& abbreviations() {
  static const std::set<std::string> list = {"dr.", "mr.", "mrs.", "ms.",  "prof.", "fig.",
                                             "eq.", "e.g.", "i.e.", "vs.", "etc."};
  return list;
}

// Word ending at position `dot` (inclusive), stripped of opening brackets and
// quotes, lowercased.
inline std::string word_before(std::string_view s, std::size_t dot, std::size_t* word_start) {
  std::size_t b = dot;
  while (b > 0 && !is_space(s[b - 1])) --b;
  *word_start = b;
  std::string w(s.substr(b, dot - b + 1));
  while (!w.empty() && (w.front() == '(' || w.front() == '"' || w.front() == '\'' || w.front() == '['))
    w.erase(w.begin());
  return lower(w);
}

inline bool is_abbreviation(std::string_view s, std::size_t dot) {
  std::size_t start = 0;
  const std::string w = word_before(s, dot, &start);
  if (abbreviations().contains(w)) return true;
  if (w == "al.") {
    std::size_t e = start;
    while (e > 0 && is_space(s[e - 1])) --e;
    std::size_t prev_start = 0;
    return e > 0 && word_before(s, e - 1, &prev_start) == "et";
  }
  return false;
}

}  // namespace detail

/// Rule-based splitter: a sentence ends at '.', '!' or '?' (plus closing
/// quotes/brackets) followed by whitespace and an uppercase letter or an
/// opening quote. Periods ending a stoplisted abbreviation do not split.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    const std::size_t end = detail::skip_closers(text, i + 1);
    if (end >= text.size() || !detail::is_space(text[end])) continue;
    std::size_t next = end;
    while (next < text.size() && detail::is_space(text[next])) ++next;
    if (!detail::starts_sentence(text, next)) continue;
    if (c == '.' && detail::is_abbreviation(text, i)) continue;
    const std::string sentence = detail::trim(text.substr(start, end - start));
    if (!sentence.empty()) out.push_back(sentence);
    start = next;
    i = next - 1;
  }
  const std::string tail = detail::trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(tail);
  return out;
}

inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (detail::is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

struct AbstractFilter {
  std::size_t min_sentences = 5;
  std::size_t min_words = 100;
};

/// True when the abstract is long enough to synthesise problems from.
inline bool filter_abstract(std::string_view text, const AbstractFilter& f = {}) {
  return split_sentences(text).size() >= f.min_sentences && word_count(text) >= f.min_words;
}

inline std::string join_sentences(std::span<const std::string> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

/// Deterministic core of problem synthesis. `removed` is the index of the
/// taken-out sentence among the n originals; `gaps` are four distinct gap
/// indices over the n - 1 remaining sentences (gap g sits before remaining
/// sentence g, gap n - 1 after the last), one of which must equal `removed`.
inline InsertionProblem make_problem(std::span<const std::string> sentences, std::size_t removed,
                                     std::array<std::size_t, kSlotCount> gaps, std::string id,
                                     ProblemSource source) {
  const std::size_t n = sentences.size();
  if (n < 5) throw DomainError("problem synthesis needs at least 5 sentences, got " + std::to_string(n));
  if (removed >= n) throw DomainError("removed sentence index out of range");
  std::sort(gaps.begin(), gaps.end());
  if (std::adjacent_find(gaps.begin(), gaps.end()) != gaps.end()) throw DomainError("gaps must be distinct");
  if (gaps.back() >= n) throw DomainError("gap index out of range");
  const auto hit = std::find(gaps.begin(), gaps.end(), removed);
  if (hit == gaps.end()) throw DomainError("true gap missing from chosen gaps");

  std::vector<std::string> remaining;
  for (std::size_t i = 0; i < n; ++i)
    if (i != removed) remaining.push_back(sentences[i]);

  InsertionProblem p;
  p.id = std::move(id);
  p.source = source;
  p.question = sentences[removed];
  p.label = static_cast<int>(hit - gaps.begin());
  std::size_t begin = 0;
  for (std::size_t part = 0; part < kPartCount; ++part) {
    const std::size_t end = part < kSlotCount ? gaps[part] : remaining.size();
    p.parts[part] = join_sentences(std::span(remaining).subspan(begin, end - begin));
    begin = end;
  }
  return p;
}

/// Removes a uniformly chosen sentence, keeps its gap as the answer and adds
/// three distinct distractor gaps drawn uniformly from the rest.
inline InsertionProblem synthesize_problem(std::span<const std::string> sentences, Rng& rng,
                                           std::string id = "synthetic",
                                           ProblemSource source = ProblemSource::synthetic) {
  const std::size_t n = sentences.size();
  if (n < 5) throw DomainError("problem synthesis needs at least 5 sentences, got " + std::to_string(n));
  const auto removed = static_cast<std::size_t>(rng.below(n));
  std::vector<std::size_t> others;
  for (std::size_t g = 0; g < n; ++g)
    if (g != removed) others.push_back(g);
  std::array<std::size_t, kSlotCount> gaps{removed, 0, 0, 0};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto j = k + static_cast<std::size_t>(rng.below(others.size() - k));
    std::swap(others[k], others[j]);
    gaps[k + 1] = others[k];
  }
  return make_problem(sentences, removed, gaps, std::move(id), source);
}

/// Inverse of synthesis: parts and question flattened back into sentences.
inline std::vector<std::string> reassemble(const InsertionProblem& p) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kPartCount; ++i) {
    for (auto& s : split_sentences(p.parts[i])) out.push_back(std::move(s));
    if (i == static_cast<std::size_t>(p.label)) out.push_back(p.question);
  }
  return out;
}

struct SynthesisOptions {
  AbstractFilter filter;
  std::size_t problems_per_abstract = 1;
  ProblemSource source = ProblemSource::arxiv;
};

/// Filters abstracts and synthesises up to `problems_per_abstract` distinct
/// problems from each. Abstract i uses the stream rng.derive(i).
inline std::vector<InsertionProblem> synthesize_corpus(std::span<const std::string> abstracts,
                                                       const Rng& rng, const SynthesisOptions& opts) {
  std::vector<InsertionProblem> out;
  for (std::size_t i = 0; i < abstracts.size(); ++i) {
    if (!filter_abstract(abstracts[i], opts.filter)) continue;
    const auto sentences = split_sentences(abstracts[i]);
    Rng local = rng.derive(i);
    std::set<std::pair<std::string, std::array<std::string, kPartCount>>> seen;
    std::size_t made = 0;
    for (std::size_t attempt = 0; made < opts.problems_per_abstract && attempt < 8 * opts.problems_per_abstract;
         ++attempt) {
      auto p = synthesize_problem(sentences, local,
                                  "a" + std::to_string(i) + "-" + std::to_string(made), opts.source);
      if (!seen.insert({p.question, p.parts}).second) continue;
      out.push_back(std::move(p));
      ++made;
    }
  }
  return out;
}

}  // namespace sentinsert
