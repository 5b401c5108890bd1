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

#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sentinsert/graph.hpp"
#include "sentinsert/matrix.hpp"
#include "sentinsert/rng.hpp"

namespace sentinsert::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = scale * rng.normal();
  return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

inline EmbeddedProblem make_embedded(std::size_t dim, Rng& rng, int label, std::string id = "p") {
  EmbeddedProblem p;
  p.id = std::move(id);
  p.label = label;
  for (auto& part : p.parts) part = random_vector(dim, rng);
  p.question = random_vector(dim, rng);
  return p;
}

inline std::string temp_path(const std::string& name) {
  return ::testing::TempDir() + "sentinsert_" + name;
}

}  // namespace sentinsert::testing
