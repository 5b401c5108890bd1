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
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/rng.hpp"

namespace sentinsert {

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> validation;
};

/// Validation size is round(ratio * n), drawn without replacement. Both
/// halves keep the input order.
template <typename T>
Split<T> split_dataset(std::span<const T> items, double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  const std::size_t n = items.size();
  const auto val_size = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(std::span(idx));
  std::vector<bool> in_val(n, false);
  for (std::size_t i = 0; i < val_size; ++i) in_val[idx[i]] = true;
  Split<T> out;
  for (std::size_t i = 0; i < n; ++i) (in_val[i] ? out.validation : out.train).push_back(items[i]);
  return out;
}

template <typename T>
Split<T> split_dataset(const std::vector<T>& items, double ratio, Rng& rng) {
  return split_dataset(std::span<const T>(items), ratio, rng);
}

/// Problems whose answer is recoverable by construction: the question is the
/// mean of the two parts flanking the true slot plus Gaussian noise (std
/// `noise_std`). Parts are i.i.d. standard normal; labels cycle 0..3.
inline std::vector<EmbeddedProblem> planted_signal_problems(std::size_t count, std::size_t dim,
                                                            double noise_std, Rng& rng) {
  std::vector<EmbeddedProblem> out;
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddedProblem p;
    p.id = "planted-" + std::to_string(i);
    p.label = static_cast<int>(i % kSlotCount);
    for (auto& part : p.parts) {
      part.resize(dim);
      for (double& x : part) x = rng.normal();
    }
    const auto& left = p.parts[static_cast<std::size_t>(p.label)];
    const auto& right = p.parts[static_cast<std::size_t>(p.label) + 1];
    p.question.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) p.question[j] = 0.5 * (left[j] + right[j]) + rng.normal(0.0, noise_std);
    out.push_back(std::move(p));
  }
  return out;
}

/// Random problem with standard-normal embeddings and a random label.
inline EmbeddedProblem random_problem(std::size_t dim, Rng& rng, std::string id = "random") {
  EmbeddedProblem p;
  p.id = std::move(id);
  p.label = static_cast<int>(rng.below(kSlotCount));
  for (auto& part : p.parts) {
    part.resize(dim);
    for (double& x : part) x = rng.normal();
  }
  p.question.resize(dim);
  for (double& x : p.question) x = rng.normal();
  return p;
}

}  // namespace sentinsert
