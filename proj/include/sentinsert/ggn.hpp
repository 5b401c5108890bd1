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
#include <optional>
#include <string>
#include <vector>

#include "sentinsert/autodiff.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/kernels.hpp"
#include "sentinsert/matrix.hpp"
#include "sentinsert/rng.hpp"

// Multi-head graph attention over the insertion graph, the slot readout MLP
// and the global loss.
namespace sentinsert {

enum class HeadMerge { concat, average };

struct GatLayerConfig {
  std::size_t in_width = 0;
  std::size_t heads = 1;
  std::size_t head_width = 4;
  HeadMerge merge = HeadMerge::concat;
  Activation activation = Activation::leaky_relu(0.2);
  double leaky_slope = 0.2;  // slope of the attention-score nonlinearity
  double attn_dropout = 0.0;
  double feat_dropout = 0.0;  // applied to the layer input while training
  bool residual = true;

  std::size_t out_width() const noexcept {
    return merge == HeadMerge::concat ? heads * head_width : head_width;
  }
  bool needs_projection() const noexcept { return residual && in_width != out_width(); }
};

/// One attention layer. T is Matrix for stored parameters and ad::Var while
/// bound to a tape.
template <typename T>
struct GatLayerT {
  GatLayerConfig config;
  std::vector<T> W;     // per head: in_width x head_width
  std::vector<T> attn;  // per head: (2 * head_width) x 1, [source half; neighbour half]
  std::optional<T> residual_proj;  // in_width x out_width, when widths differ
};

template <typename T>
struct GgnT {
  std::vector<GatLayerT<T>> layers;
};

/// Readout shared by the global and the fused branch: tanh hidden layer then
/// a sigmoid unit.
template <typename T>
struct SharedMlpT {
  T w1;  // width x hidden
  T b1;  // 1 x hidden
  T w2;  // hidden x 1
  T b2;  // 1 x 1
};

using GatLayerParams = GatLayerT<Matrix>;
using GgnParams = GgnT<Matrix>;
using SharedMlp = SharedMlpT<Matrix>;

template <typename T, typename F>
void for_each_tensor(GatLayerT<T>& layer, const std::string& prefix, F&& fn) {
  for (std::size_t h = 0; h < layer.W.size(); ++h) fn(prefix + ".W" + std::to_string(h), layer.W[h]);
  for (std::size_t h = 0; h < layer.attn.size(); ++h)
    fn(prefix + ".attn" + std::to_string(h), layer.attn[h]);
  if (layer.residual_proj) fn(prefix + ".residual", *layer.residual_proj);
}

template <typename T, typename F>
void for_each_tensor(GgnT<T>& ggn, const std::string& prefix, F&& fn) {
  for (std::size_t l = 0; l < ggn.layers.size(); ++l)
    for_each_tensor(ggn.layers[l], prefix + ".layer" + std::to_string(l), fn);
}

template <typename T, typename F>
void for_each_tensor(SharedMlpT<T>& mlp, const std::string& prefix, F&& fn) {
  fn(prefix + ".w1", mlp.w1);
  fn(prefix + ".b1", mlp.b1);
  fn(prefix + ".w2", mlp.w2);
  fn(prefix + ".b2", mlp.b2);
}

/// Glorot-uniform matrix, range ±sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-limit, limit);
  return m;
}

inline GatLayerParams init_gat_layer(const GatLayerConfig& cfg, Rng& rng) {
  GatLayerParams p;
  p.config = cfg;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    p.W.push_back(glorot(cfg.in_width, cfg.head_width, rng));
    p.attn.push_back(glorot(2 * cfg.head_width, 1, rng));
  }
  if (cfg.needs_projection()) p.residual_proj = glorot(cfg.in_width, cfg.out_width(), rng);
  return p;
}

/// Two-layer network: concatenating hidden layer, averaging output layer.
inline std::vector<GatLayerConfig> ggn_layer_configs(std::size_t in_width, std::size_t hidden_heads,
                                                     std::size_t out_heads, std::size_t head_width,
                                                     double leaky_slope, double attn_dropout,
                                                     double dropout) {
  GatLayerConfig hidden;
  hidden.in_width = in_width;
  hidden.heads = hidden_heads;
  hidden.head_width = head_width;
  hidden.merge = HeadMerge::concat;
  hidden.activation = Activation::leaky_relu(leaky_slope);
  hidden.leaky_slope = leaky_slope;
  hidden.attn_dropout = attn_dropout;
  hidden.feat_dropout = 0.0;

  GatLayerConfig out = hidden;
  out.in_width = hidden.out_width();
  out.heads = out_heads;
  out.merge = HeadMerge::average;
  out.activation = Activation::identity();
  out.feat_dropout = dropout;
  return {hidden, out};
}

inline GgnParams init_ggn(const std::vector<GatLayerConfig>& configs, Rng& rng) {
  GgnParams g;
  for (const auto& c : configs) g.layers.push_back(init_gat_layer(c, rng));
  return g;
}

inline SharedMlp init_shared_mlp(std::size_t width, std::size_t hidden, Rng& rng) {
  return {glorot(width, hidden, rng), Matrix(1, hidden), glorot(hidden, 1, rng), Matrix(1, 1)};
}

namespace ad {

/// Attention coefficients of one head: row i holds α_ij over j ∈ N_i.
/// `Wh` is the head-projected input (n x head_width). While training, each
/// (i, j) entry is dropped with probability `attn_dropout` and the survivors
/// renormalised.
inline Var attention(Tape& t, Var Wh, Var attn_vec, std::size_t head_width, double leaky_slope,
                     const Matrix& nbr_mask, double attn_dropout, Rng* rng, bool training) {
  const Var src = matmul(t, Wh, slice_rows(t, attn_vec, 0, head_width));
  const Var dst = matmul(t, Wh, slice_rows(t, attn_vec, head_width, head_width));
  const Var scores = activate(t, pairwise_sum(t, src, dst), Activation::leaky_relu(leaky_slope));
  Matrix mask = nbr_mask;
  if (training && attn_dropout > 0.0) {
    if (rng == nullptr) throw DomainError("attention dropout needs an rng");
    for (double& m : mask.data())
      if (m != 0.0 && rng->uniform() < attn_dropout) m = 0.0;
  }
  return masked_softmax(t, scores, std::move(mask));
}

struct GatLayerTrace {
  std::vector<Matrix> attention;  // one n x n matrix per head
};

inline Var gat_layer(Tape& t, Var H, const GatLayerT<Var>& layer, const Matrix& nbr_mask, Rng* rng,
                     bool training, GatLayerTrace* trace = nullptr) {
  const GatLayerConfig& cfg = layer.config;
  if (t.value(H).cols() != cfg.in_width) {
    throw ShapeError("gat_layer: input width " + std::to_string(t.value(H).cols()) +
                     ", layer expects " + std::to_string(cfg.in_width));
  }
  Var x = H;
  if (training && cfg.feat_dropout > 0.0) {
    if (rng == nullptr) throw DomainError("feature dropout needs an rng");
    const Matrix& hv = t.value(H);
    x = mask_mul(t, x, dropout_mask(hv.rows(), hv.cols(), cfg.feat_dropout, *rng));
  }
  std::vector<Var> heads;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Var Wh = matmul(t, x, layer.W[h]);
    const Var alpha = attention(t, Wh, layer.attn[h], cfg.head_width, cfg.leaky_slope, nbr_mask,
                                cfg.attn_dropout, rng, training);
    if (trace) trace->attention.push_back(t.value(alpha));
    heads.push_back(matmul(t, alpha, Wh));
  }
  Var merged = cfg.merge == HeadMerge::concat ? concat_cols(t, heads) : mean_of(t, heads);
  if (cfg.residual) {
    merged = add(t, merged, layer.residual_proj ? matmul(t, x, *layer.residual_proj) : x);
  }
  return activate(t, merged, cfg.activation);
}

inline Var ggn_forward(Tape& t, Var H0, const GgnT<Var>& ggn, const Matrix& nbr_mask, Rng* rng,
                       bool training, std::vector<GatLayerTrace>* traces = nullptr) {
  Var h = H0;
  for (const auto& layer : ggn.layers) {
    GatLayerTrace trace;
    h = gat_layer(t, h, layer, nbr_mask, rng, training, traces ? &trace : nullptr);
    if (traces) traces->push_back(std::move(trace));
  }
  return h;
}

/// Selector picking the slot rows A..D out of a graph-ordered matrix.
inline Matrix slot_selector(const InsertionGraph& g) {
  Matrix sel(kSlotCount, g.node_count());
  for (std::size_t s = 0; s < kSlotCount; ++s) sel(s, g.index_of(slot_role(s))) = 1.0;
  return sel;
}

/// Per-slot probabilities (4 x 1) from the slot rows of H.
inline Var slot_readout(Tape& t, Var H, const SharedMlpT<Var>& mlp, const InsertionGraph& g) {
  const Var slots = matmul(t, t.constant(slot_selector(g)), H);
  const Var hidden = activate(t, add_row(t, matmul(t, slots, mlp.w1), mlp.b1), Activation::tanh());
  const Var logits = add_row(t, matmul(t, hidden, mlp.w2), mlp.b2);
  return activate(t, logits, Activation::sigmoid());
}

inline Matrix one_hot_column(int label) {
  Matrix y(kSlotCount, 1);
  y(static_cast<std::size_t>(label), 0) = 1.0;
  return y;
}

inline GatLayerT<Var> bind(Tape& t, const GatLayerParams& p, bool requires_grad = true) {
  GatLayerT<Var> v;
  v.config = p.config;
  for (const auto& w : p.W) v.W.push_back(t.leaf(w, requires_grad));
  for (const auto& a : p.attn) v.attn.push_back(t.leaf(a, requires_grad));
  if (p.residual_proj) v.residual_proj = t.leaf(*p.residual_proj, requires_grad);
  return v;
}

inline GgnT<Var> bind(Tape& t, const GgnParams& p, bool requires_grad = true) {
  GgnT<Var> v;
  for (const auto& l : p.layers) v.layers.push_back(bind(t, l, requires_grad));
  return v;
}

inline SharedMlpT<Var> bind(Tape& t, const SharedMlp& p, bool requires_grad = true) {
  return {t.leaf(p.w1, requires_grad), t.leaf(p.b1, requires_grad), t.leaf(p.w2, requires_grad),
          t.leaf(p.b2, requires_grad)};
}

}  // namespace ad

// Value-level entry points. Each runs a private tape in forward mode.

/// α for one layer and head; row i is the distribution over N_i.
inline Matrix attention_weights(const Matrix& H, const GatLayerParams& layer, const InsertionGraph& g,
                                std::size_t head, Rng* rng, bool training) {
  if (H.rows() != g.node_count()) throw ShapeError("attention_weights: H must have one row per node");
  if (head >= layer.config.heads) throw DomainError("attention_weights: head out of range");
  ad::Tape t;
  const auto v = ad::bind(t, layer, false);
  const ad::Var Wh = ad::matmul(t, t.constant(H), v.W[head]);
  const ad::Var alpha =
      ad::attention(t, Wh, v.attn[head], layer.config.head_width, layer.config.leaky_slope,
                    neighborhood_mask(g), layer.config.attn_dropout, rng, training);
  return t.value(alpha);
}

inline Matrix gat_layer(const Matrix& H, const GatLayerParams& layer, const InsertionGraph& g,
                        Rng* rng, bool training) {
  ad::Tape t;
  const auto v = ad::bind(t, layer, false);
  return t.value(ad::gat_layer(t, t.constant(H), v, neighborhood_mask(g), rng, training));
}

inline Matrix ggn_forward(const InsertionGraph& g, const GgnParams& params, Rng* rng, bool training) {
  ad::Tape t;
  const auto v = ad::bind(t, params, false);
  return t.value(ad::ggn_forward(t, t.constant(g.features), v, neighborhood_mask(g), rng, training));
}

inline std::array<double, kSlotCount> slot_readout(const Matrix& H, const SharedMlp& mlp,
                                                   const InsertionGraph& g) {
  if (H.rows() != g.node_count()) throw ShapeError("slot_readout: H must have one row per node");
  ad::Tape t;
  const auto v = ad::bind(t, mlp, false);
  const Matrix& p = t.value(ad::slot_readout(t, t.constant(H), v, g));
  return {p[0], p[1], p[2], p[3]};
}

inline std::array<double, kSlotCount> one_hot(int label) {
  std::array<double, kSlotCount> y{};
  y.at(static_cast<std::size_t>(label)) = 1.0;
  return y;
}

/// Mean BCE of the four slot probabilities against the one-hot label.
inline double ggn_loss(const std::array<double, kSlotCount>& probs, int label) {
  if (label < 0 || label >= static_cast<int>(kSlotCount)) throw DomainError("label out of range");
  const auto y = one_hot(label);
  return bce_loss(probs, y);
}

}  // namespace sentinsert
