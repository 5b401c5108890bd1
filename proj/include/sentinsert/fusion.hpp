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
#include <span>
#include <vector>

#include "sentinsert/autodiff.hpp"
#include "sentinsert/ggn.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/lgn.hpp"
#include "sentinsert/matrix.hpp"

namespace sentinsert {

struct LossWeights {
  double alpha = 0.2;  // global branch
  double beta = 0.2;   // local sub-graph branch
  double gamma = 1.0;  // fused branch

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) throw ConfigError("loss weights must be >= 0");
  }
};

struct FusedState {
  Matrix E;
  std::vector<std::size_t> membership_counts;
};

/// For sub-graph k, the 9 x 3 matrix that scatters its rows onto graph nodes
/// divided by each node's membership count. Summing S_k · Z_k over k gives
/// the membership-averaged local features.
inline std::array<Matrix, kSlotCount> fusion_scatter(const InsertionGraph& g) {
  const auto counts = membership_counts(g);
  std::array<Matrix, kSlotCount> out;
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    out[k] = Matrix(g.node_count(), 3);
    const auto roles = subgraph_roles(k);
    for (std::size_t r = 0; r < 3; ++r) {
      const std::size_t node = g.index_of(roles[r]);
      out[k](node, r) = 1.0 / static_cast<double>(counts[node]);
    }
  }
  return out;
}

namespace ad {

/// E = H_L + membership-averaged last-layer fingerprints.
inline Var fuse(Tape& t, Var H_L, std::span<const Var> last_fingerprints, const InsertionGraph& g) {
  if (last_fingerprints.size() != kSlotCount) throw ShapeError("fuse: need four sub-graphs");
  const auto scatter = fusion_scatter(g);
  Var e = H_L;
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    if (t.value(last_fingerprints[k]).cols() != t.value(H_L).cols()) {
      throw ShapeError("fuse: fingerprint width " +
                       std::to_string(t.value(last_fingerprints[k]).cols()) + " != global width " +
                       std::to_string(t.value(H_L).cols()));
    }
    e = add(t, e, matmul(t, t.constant(scatter[k]), last_fingerprints[k]));
  }
  return e;
}

inline Var fused_forward(Tape& t, Var E, const GgnT<Var>& fused_ggn, const SharedMlpT<Var>& mlp,
                         const InsertionGraph& g, Rng* rng, bool training) {
  const Var h = ggn_forward(t, E, fused_ggn, neighborhood_mask(g), rng, training);
  return slot_readout(t, h, mlp, g);
}

}  // namespace ad

inline FusedState fuse(const Matrix& H_L, const std::array<Fingerprints, kSlotCount>& fingerprints,
                       const InsertionGraph& g) {
  if (H_L.rows() != g.node_count()) throw ShapeError("fuse: H_L must have one row per node");
  ad::Tape t;
  std::vector<ad::Var> last;
  for (const auto& f : fingerprints) {
    if (f.layers.empty()) throw ShapeError("fuse: empty fingerprints");
    last.push_back(t.constant(f.layers.back()));
  }
  return {t.value(ad::fuse(t, t.constant(H_L), last, g)), membership_counts(g)};
}

inline std::array<double, kSlotCount> fused_forward(const Matrix& E, const GgnParams& fused_ggn,
                                                    const SharedMlp& mlp, const InsertionGraph& g,
                                                    Rng* rng, bool training) {
  ad::Tape t;
  const auto gv = ad::bind(t, fused_ggn, false);
  const auto mv = ad::bind(t, mlp, false);
  const Matrix& p = t.value(ad::fused_forward(t, t.constant(E), gv, mv, g, rng, training));
  return {p[0], p[1], p[2], p[3]};
}

inline double total_loss(double global, double local, double fused, const LossWeights& w) {
  return w.alpha * global + w.beta * local + w.gamma * fused;
}

/// Argmax; ties go to the earliest slot.
inline int predict_slot(const std::array<double, kSlotCount>& probs) {
  int best = 0;
  for (std::size_t k = 1; k < kSlotCount; ++k)
    if (probs[k] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

}  // namespace sentinsert
