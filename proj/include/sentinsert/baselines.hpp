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
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentinsert/adam.hpp"
#include "sentinsert/autodiff.hpp"
#include "sentinsert/errors.hpp"
#include "sentinsert/fusion.hpp"
#include "sentinsert/ggn.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/kernels.hpp"
#include "sentinsert/rng.hpp"

// Unsupervised coherence-graph insertion and the pairwise-order
// (topological sort) baseline.
namespace sentinsert {

enum class CoherenceAlgorithm { pav, ssv, msv };

inline std::string to_string(CoherenceAlgorithm a) {
  switch (a) {
    case CoherenceAlgorithm::pav: return "pav";
    case CoherenceAlgorithm::ssv: return "ssv";
    case CoherenceAlgorithm::msv: return "msv";
  }
  return "?";
}

struct WeightedEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;
  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

struct CoherenceGraph {
  std::size_t n = 0;
  std::vector<WeightedEdge> edges;
  CoherenceAlgorithm algorithm = CoherenceAlgorithm::pav;
  std::optional<double> theta;
};

/// Cosine similarity; 0 when either vector is all zeros.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

inline CoherenceGraph build_coherence_graph(const std::vector<std::vector<double>>& sents,
                                            CoherenceAlgorithm alg,
                                            std::optional<double> theta = std::nullopt) {
  if (sents.empty()) throw DomainError("coherence graph needs at least one sentence");
  if (alg == CoherenceAlgorithm::msv && !theta) throw ConfigError("MSV requires a threshold theta");
  CoherenceGraph g;
  g.n = sents.size();
  g.algorithm = alg;
  if (alg == CoherenceAlgorithm::msv) g.theta = theta;

  const std::size_t n = sents.size();
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sim[i * n + j] = cosine_similarity(sents[i], sents[j]);

  switch (alg) {
    case CoherenceAlgorithm::pav:
      for (std::size_t i = 1; i < n; ++i) g.edges.push_back({i, i - 1, sim[i * n + i - 1]});
      break;
    case CoherenceAlgorithm::ssv:
      for (std::size_t i = 0; i < n && n >= 2; ++i) {
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && sim[i * n + j] > sim[i * n + best]) best = j;
        g.edges.push_back({i, best, sim[i * n + best]});
      }
      break;
    case CoherenceAlgorithm::msv:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j && sim[i * n + j] >= *theta) g.edges.push_back({i, j, sim[i * n + j]});
      break;
  }
  return g;
}

/// Mean edge weight; 0 for an edgeless graph. Weights are summed in sorted
/// order so graphs with the same weight multiset score identically.
inline double coherence_score(const CoherenceGraph& g) {
  if (g.edges.empty()) return 0.0;
  std::vector<double> weights;
  weights.reserve(g.edges.size());
  for (const auto& e : g.edges) weights.push_back(e.weight);
  std::sort(weights.begin(), weights.end());
  double total = 0.0;
  for (double w : weights) total += w;
  return total / static_cast<double>(weights.size());
}

/// Sentence sequence with the question placed at `slot`; zero (padding)
/// parts are left out.
inline std::vector<std::vector<double>> sequence_with_insertion(const EmbeddedProblem& p,
                                                                std::size_t slot) {
  std::vector<std::vector<double>> seq;
  for (std::size_t i = 0; i < kPartCount; ++i) {
    if (!is_zero_vector(p.parts[i])) seq.push_back(p.parts[i]);
    if (i == slot) seq.push_back(p.question);
  }
  return seq;
}

inline std::array<double, kSlotCount> coherence_slot_scores(const EmbeddedProblem& p,
                                                            CoherenceAlgorithm alg,
                                                            std::optional<double> theta) {
  std::array<double, kSlotCount> scores{};
  for (std::size_t k = 0; k < kSlotCount; ++k)
    scores[k] = coherence_score(build_coherence_graph(sequence_with_insertion(p, k), alg, theta));
  return scores;
}

inline int insert_by_coherence(const EmbeddedProblem& p, CoherenceAlgorithm alg,
                               std::optional<double> theta = std::nullopt) {
  p.validate();
  return predict_slot(coherence_slot_scores(p, alg, theta));
}

// ---------------------------------------------------------------------------
// Topological-sort baseline: an MLP scores P(u precedes v) for sentence pairs;
// the inserted sentence's slot is the one most consistent with its predicted
// order against every context part.

template <typename T>
struct PairwiseOrderModelT {
  T w1;  // 3d x hidden
  T b1;  // 1 x hidden
  T w2;  // hidden x 1
  T b2;  // 1 x 1
};

using PairwiseOrderModel = PairwiseOrderModelT<Matrix>;

inline PairwiseOrderModel init_pairwise_model(std::size_t dim, std::size_t hidden, Rng& rng) {
  return {glorot(3 * dim, hidden, rng), Matrix(1, hidden), glorot(hidden, 1, rng), Matrix(1, 1)};
}

template <typename T, typename F>
void for_each_tensor(PairwiseOrderModelT<T>& m, F&& fn) {
  fn("w1", m.w1);
  fn("b1", m.b1);
  fn("w2", m.w2);
  fn("b2", m.b2);
}

struct OrderPair {
  std::vector<double> u;
  std::vector<double> v;
  double label = 0.0;  // 1 iff u precedes v
};

/// concat(u, v, |u - v|) as a 1 x 3d row.
inline Matrix pair_features(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("pair_features: length mismatch");
  const std::size_t d = u.size();
  Matrix x(1, 3 * d);
  for (std::size_t i = 0; i < d; ++i) {
    x(0, i) = u[i];
    x(0, d + i) = v[i];
    x(0, 2 * d + i) = std::abs(u[i] - v[i]);
  }
  return x;
}

namespace ad {

inline Var pairwise_forward(Tape& t, Var features, const PairwiseOrderModelT<Var>& m) {
  const Var h = activate(t, add_row(t, matmul(t, features, m.w1), m.b1), Activation::tanh());
  return activate(t, add_row(t, matmul(t, h, m.w2), m.b2), Activation::sigmoid());
}

}  // namespace ad

inline double pairwise_precedes(const PairwiseOrderModel& m, std::span<const double> u,
                                std::span<const double> v) {
  ad::Tape t;
  const PairwiseOrderModelT<ad::Var> vars{t.leaf(m.w1, false), t.leaf(m.b1, false),
                                          t.leaf(m.w2, false), t.leaf(m.b2, false)};
  return t.value(ad::pairwise_forward(t, t.constant(pair_features(u, v)), vars))(0, 0);
}

inline double pairwise_loss(const PairwiseOrderModel& m, std::span<const OrderPair> pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    const double prob[] = {pairwise_precedes(m, p.u, p.v)};
    const double label[] = {p.label};
    total += bce_loss(prob, label);
  }
  return total / static_cast<double>(pairs.size());
}

/// Every ordered pair from each training problem's true sequence (question at
/// its labelled slot, padding parts skipped), in both orientations.
inline std::vector<OrderPair> harvest_order_pairs(std::span<const EmbeddedProblem> problems) {
  std::vector<OrderPair> pairs;
  for (const auto& p : problems) {
    const auto seq = sequence_with_insertion(p, static_cast<std::size_t>(p.label));
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (std::size_t j = i + 1; j < seq.size(); ++j) {
        pairs.push_back({seq[i], seq[j], 1.0});
        pairs.push_back({seq[j], seq[i], 0.0});
      }
  }
  return pairs;
}

struct ToposortTrainReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::vector<double> epoch_loss;
};

/// Per-pair Adam updates on the BCE of the precedence prediction.
inline ToposortTrainReport toposort_train(std::span<const OrderPair> pairs, PairwiseOrderModel& model,
                                          std::size_t epochs, double lr, Rng& rng) {
  if (pairs.empty()) throw ConfigError("toposort_train: no training pairs");
  ToposortTrainReport report;
  report.loss_before = pairwise_loss(model, pairs);

  AdamOptions opts;
  opts.lr = lr;
  opts.weight_decay = 0.0;
  std::vector<Matrix*> params;
  for_each_tensor(model, [&](const char*, Matrix& m) { params.push_back(&m); });
  std::vector<AdamState> states;
  for (Matrix* p : params) states.emplace_back(*p, opts);

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t idx : order) {
      const OrderPair& pair = pairs[idx];
      ad::Tape t;
      PairwiseOrderModelT<ad::Var> vars{t.leaf(model.w1), t.leaf(model.b1), t.leaf(model.w2),
                                        t.leaf(model.b2)};
      const ad::Var prob = ad::pairwise_forward(t, t.constant(pair_features(pair.u, pair.v)), vars);
      const ad::Var loss = ad::bce(t, prob, Matrix(1, 1, pair.label));
      total += t.value(loss)(0, 0);
      t.backward(loss);
      std::size_t k = 0;
      for_each_tensor(vars, [&](const char*, ad::Var& v) {
        adam_step(*params[k], t.grad(v), states[k]);
        ++k;
      });
    }
    report.epoch_loss.push_back(total / static_cast<double>(pairs.size()));
  }
  report.loss_after = pairwise_loss(model, pairs);
  return report;
}

/// Slot maximising Σ_{i<=k} log(1 - p_i) + Σ_{i>k} log p_i, where p_i is
/// P(question precedes part i). Parts with present[i] == false are skipped.
inline int toposort_slot(const std::array<double, kPartCount>& p,
                         const std::array<bool, kPartCount>& present = {true, true, true, true, true}) {
  std::array<double, kSlotCount> scores{};
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < kPartCount; ++i) {
      if (!present[i]) continue;
      const double pi = clamp_prob(p[i]);
      s += i <= k ? std::log(1.0 - pi) : std::log(pi);
    }
    scores[k] = s;
  }
  return predict_slot(scores);
}

inline int toposort_infer(const EmbeddedProblem& p, const PairwiseOrderModel& model) {
  p.validate();
  std::array<double, kPartCount> probs{};
  std::array<bool, kPartCount> present{};
  for (std::size_t i = 0; i < kPartCount; ++i) {
    present[i] = !is_zero_vector(p.parts[i]);
    probs[i] = present[i] ? pairwise_precedes(model, p.question, p.parts[i]) : 0.5;
  }
  return toposort_slot(probs, present);
}

}  // namespace sentinsert
