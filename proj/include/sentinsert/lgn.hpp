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
#include <string>
#include <vector>

#include "sentinsert/autodiff.hpp"
#include "sentinsert/ggn.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/kernels.hpp"
#include "sentinsert/matrix.hpp"

// Local graph network: a GCN shared by the four slot sub-graphs, per-layer
// outputs concatenated as WL-style fingerprints, pooled and classified.
namespace sentinsert {

inline constexpr std::size_t kPoolSize = 4;

template <typename T>
struct GcnLayerT {
  T W;  // w_in x w_out; relu applied after propagation
};

template <typename T>
struct LgnHeadT {
  T fc;    // pooled_len x 1
  T bias;  // 1 x 1
};

template <typename T>
struct LgnT {
  std::vector<GcnLayerT<T>> layers;
  LgnHeadT<T> head;
  double dropout = 0.0;  // between GCN layers while training
};

using GcnLayerParams = GcnLayerT<Matrix>;
using LgnHead = LgnHeadT<Matrix>;
using LgnParams = LgnT<Matrix>;

template <typename T, typename F>
void for_each_tensor(LgnT<T>& lgn, const std::string& prefix, F&& fn) {
  for (std::size_t m = 0; m < lgn.layers.size(); ++m)
    fn(prefix + ".gcn" + std::to_string(m), lgn.layers[m].W);
  fn(prefix + ".fc", lgn.head.fc);
  fn(prefix + ".fc_bias", lgn.head.bias);
}

/// Length of the flattened pooled fingerprint for 3-node sub-graphs.
inline std::size_t pooled_length(std::size_t concat_width) {
  const std::size_t pooled_rows = (3 + kPoolSize - 1) / kPoolSize;
  const std::size_t pooled_cols = (concat_width + kPoolSize - 1) / kPoolSize;
  return pooled_rows * pooled_cols;
}

inline LgnParams init_lgn(std::size_t in_width, std::size_t width, std::size_t layers, double dropout,
                          Rng& rng) {
  LgnParams p;
  std::size_t w_in = in_width;
  for (std::size_t m = 0; m < layers; ++m) {
    p.layers.push_back({glorot(w_in, width, rng)});
    w_in = width;
  }
  const std::size_t pooled = pooled_length(width * layers);
  p.head = {glorot(pooled, 1, rng), Matrix(1, 1)};
  p.dropout = dropout;
  return p;
}

/// D̃^{-1/2} Ã D̃^{-1/2} with Ã the symmetrised adjacency plus self-loops.
inline Matrix normalized_adjacency(std::size_t nodes, const std::vector<Edge>& edges) {
  Matrix a = Matrix::identity(nodes);
  for (const Edge& e : edges) {
    a(e.from, e.to) = 1.0;
    a(e.to, e.from) = 1.0;
  }
  std::vector<double> inv_sqrt(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < nodes; ++j) deg += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

/// Per-layer outputs Z^1..Z^M of one sub-graph plus their column concat.
struct Fingerprints {
  std::vector<Matrix> layers;
  Matrix concat;
};

namespace ad {

inline Var gcn_layer(Tape& t, Var H, Var adjacency, const GcnLayerT<Var>& layer) {
  return activate(t, matmul(t, adjacency, matmul(t, H, layer.W)), Activation::relu());
}

struct FingerprintVars {
  std::vector<Var> layers;
  Var concat;
};

inline FingerprintVars wl_fingerprints(Tape& t, Var features, Var adjacency, const LgnT<Var>& lgn,
                                       Rng* rng, bool training) {
  if (lgn.layers.empty()) throw DomainError("wl_fingerprints: at least one GCN layer required");
  FingerprintVars out;
  Var h = features;
  for (std::size_t m = 0; m < lgn.layers.size(); ++m) {
    if (m > 0 && training && lgn.dropout > 0.0) {
      if (rng == nullptr) throw DomainError("GCN dropout needs an rng");
      const Matrix& hv = t.value(h);
      h = mask_mul(t, h, dropout_mask(hv.rows(), hv.cols(), lgn.dropout, *rng));
    }
    h = gcn_layer(t, h, adjacency, lgn.layers[m]);
    out.layers.push_back(h);
  }
  out.concat = concat_cols(t, out.layers);
  return out;
}

/// Probability (1 x 1) that the sub-graph's slot is the answer.
inline Var classify_subgraph(Tape& t, Var concat, const LgnHeadT<Var>& head) {
  const Var pooled = flatten_row(t, avg_pool(t, concat, kPoolSize));
  const Var logit = add_row(t, matmul(t, pooled, head.fc), head.bias);
  return activate(t, logit, Activation::sigmoid());
}

inline GcnLayerT<Var> bind(Tape& t, const GcnLayerParams& p, bool requires_grad = true) {
  return {t.leaf(p.W, requires_grad)};
}

inline LgnT<Var> bind(Tape& t, const LgnParams& p, bool requires_grad = true) {
  LgnT<Var> v;
  for (const auto& l : p.layers) v.layers.push_back(bind(t, l, requires_grad));
  v.head = {t.leaf(p.head.fc, requires_grad), t.leaf(p.head.bias, requires_grad)};
  v.dropout = p.dropout;
  return v;
}

}  // namespace ad

inline Matrix gcn_layer(const Matrix& features, const std::vector<Edge>& edges,
                        const GcnLayerParams& layer) {
  ad::Tape t;
  const auto v = ad::bind(t, layer, false);
  const auto adj = t.constant(normalized_adjacency(features.rows(), edges));
  return t.value(ad::gcn_layer(t, t.constant(features), adj, v));
}

inline Fingerprints wl_fingerprints(const SubGraph& sub, const LgnParams& lgn, Rng* rng = nullptr,
                                    bool training = false) {
  ad::Tape t;
  const auto v = ad::bind(t, lgn, false);
  const auto adj = t.constant(normalized_adjacency(sub.features.rows(), sub.edges));
  const auto fp = ad::wl_fingerprints(t, t.constant(sub.features), adj, v, rng, training);
  Fingerprints out;
  for (ad::Var z : fp.layers) out.layers.push_back(t.value(z));
  out.concat = t.value(fp.concat);
  return out;
}

inline double classify_subgraph(const Fingerprints& f, const LgnHead& head) {
  if (f.concat.rows() != 3) throw ShapeError("classify_subgraph: fingerprints must have 3 rows");
  if (pooled_length(f.concat.cols()) != head.fc.rows()) {
    throw ShapeError("classify_subgraph: fingerprint width " + std::to_string(f.concat.cols()) +
                     " does not match head input " + std::to_string(head.fc.rows()));
  }
  ad::Tape t;
  const LgnHeadT<ad::Var> v{t.leaf(head.fc, false), t.leaf(head.bias, false)};
  return t.value(ad::classify_subgraph(t, t.constant(f.concat), v))(0, 0);
}

inline double lgn_loss(const std::array<double, kSlotCount>& probs, int label) {
  return ggn_loss(probs, label);
}

}  // namespace sentinsert
