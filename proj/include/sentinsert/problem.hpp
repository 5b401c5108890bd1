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

#include <array>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "sentinsert/errors.hpp"
#include "sentinsert/graph.hpp"

namespace sentinsert {

enum class ProblemSource { toefl, arxiv, synthetic };

inline std::string to_string(ProblemSource s) {
  switch (s) {
    case ProblemSource::toefl: return "toefl";
    case ProblemSource::arxiv: return "arxiv";
    case ProblemSource::synthetic: return "synthetic";
  }
  return "?";
}

inline ProblemSource parse_source(const std::string& s) {
  if (s == "toefl") return ProblemSource::toefl;
  if (s == "arxiv") return ProblemSource::arxiv;
  if (s == "synthetic") return ProblemSource::synthetic;
  throw ValidationError("unknown problem source '" + s + "'");
}

/// One insertion question: five context parts around slots A..D, the
/// sentence to insert, and the index of the correct slot.
struct InsertionProblem {
  std::string id;
  std::array<std::string, kPartCount> parts;
  std::string question;
  int label = 0;
  ProblemSource source = ProblemSource::synthetic;

  friend bool operator==(const InsertionProblem&, const InsertionProblem&) = default;

  void validate() const {
    if (id.empty()) throw ValidationError("problem id is empty");
    if (question.empty()) throw ValidationError("problem " + id + ": question is empty");
    if (label < 0 || label >= static_cast<int>(kSlotCount)) {
      throw ValidationError("problem " + id + ": label " + std::to_string(label) + " out of range 0..3");
    }
  }
};

inline nlohmann::json to_json(const InsertionProblem& p) {
  return {{"id", p.id},
          {"parts", p.parts},
          {"question", p.question},
          {"label", p.label},
          {"source", to_string(p.source)}};
}

inline InsertionProblem problem_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("record is not an object");
  InsertionProblem p;
  p.id = j.at("id").get<std::string>();
  const auto& parts = j.at("parts");
  if (!parts.is_array() || parts.size() != kPartCount) {
    throw ValidationError("parts must be an array of exactly 5 strings");
  }
  for (std::size_t i = 0; i < kPartCount; ++i) p.parts[i] = parts[i].get<std::string>();
  p.question = j.at("question").get<std::string>();
  p.label = j.at("label").get<int>();
  p.source = parse_source(j.value("source", std::string("synthetic")));
  p.validate();
  return p;
}

/// Parses line-delimited JSON records. Blank lines are skipped.
inline std::vector<InsertionProblem> parse_problems(std::istream& in) {
  std::vector<InsertionProblem> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    InsertionProblem p;
    try {
      p = problem_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!ids.insert(p.id).second) {
      throw IntegrityError("line " + std::to_string(line_no) + ": duplicate problem id '" + p.id + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<InsertionProblem> read_problems(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file " + path);
  return parse_problems(in);
}

inline void write_problems(std::ostream& out, std::span<const InsertionProblem> problems) {
  for (const auto& p : problems) out << to_json(p).dump() << '\n';
}

inline void write_problems(const std::string& path, std::span<const InsertionProblem> problems) {
  std::unordered_set<std::string> ids;
  for (const auto& p : problems) {
    p.validate();
    if (!ids.insert(p.id).second) throw IntegrityError("duplicate problem id '" + p.id + "'");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write problem file " + path);
  write_problems(out, problems);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace sentinsert
