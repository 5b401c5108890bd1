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
#include <span>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/matrix.hpp"
#include "sentinsert/rng.hpp"

namespace sentinsert {

inline constexpr double kProbClamp = 1e-7;

struct Activation {
  enum class Kind { identity, relu, leaky_relu, tanh, sigmoid };

  Kind kind = Kind::identity;
  double slope = 0.0;  // leaky_relu only

  static constexpr Activation identity() { return {Kind::identity, 0.0}; }
  static constexpr Activation relu() { return {Kind::relu, 0.0}; }
  static constexpr Activation leaky_relu(double slope) { return {Kind::leaky_relu, slope}; }
  static constexpr Activation tanh() { return {Kind::tanh, 0.0}; }
  static constexpr Activation sigmoid() { return {Kind::sigmoid, 0.0}; }
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double apply(Activation act, double x) {
  switch (act.kind) {
    case Activation::Kind::identity: return x;
    case Activation::Kind::relu: return x > 0.0 ? x : 0.0;
    case Activation::Kind::leaky_relu: return x >= 0.0 ? x : act.slope * x;
    case Activation::Kind::tanh: return std::tanh(x);
    case Activation::Kind::sigmoid: return sigmoid(x);
  }
  return x;
}

/// d act(x) / dx, written in terms of the input x and output y.
inline double derivative(Activation act, double x, double y) {
  switch (act.kind) {
    case Activation::Kind::identity: return 1.0;
    case Activation::Kind::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Kind::leaky_relu: return x >= 0.0 ? 1.0 : act.slope;
    case Activation::Kind::tanh: return 1.0 - y * y;
    case Activation::Kind::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

inline void validate(Activation act) {
  if (act.kind == Activation::Kind::leaky_relu && !(act.slope > 0.0 && act.slope < 1.0)) {
    throw DomainError("leaky_relu slope must lie in (0, 1)");
  }
}

inline Matrix activation(Matrix x, Activation act) {
  validate(act);
  for (double& v : x.data()) v = apply(act, v);
  return x;
}

/// Numerically stable softmax (max subtracted before exponentiation).
inline std::vector<double> softmax_over_set(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("softmax over an empty set");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// Inverted dropout mask: entries are 0 or 1/(1-rate).
inline Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  Matrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data()) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

inline Matrix dropout(Matrix x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  Matrix mask = dropout_mask(x.rows(), x.cols(), rate, rng);
  return hadamard(std::move(x), mask);
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// Mean binary cross-entropy, -[y log p + (1-y) log(1-p)], p clamped first.
inline double bce_loss(std::span<const double> probs, std::span<const double> labels) {
  if (probs.size() != labels.size()) throw ShapeError("bce_loss: length mismatch");
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    const double y = labels[i];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

}  // namespace sentinsert
