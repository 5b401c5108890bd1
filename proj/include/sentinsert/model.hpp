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
#include "sentinsert/fusion.hpp"
#include "sentinsert/ggn.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/lgn.hpp"
#include "sentinsert/matrix.hpp"
#include "sentinsert/rng.hpp"

namespace sentinsert {

/// Architecture hyperparameters.
struct ModelConfig {
  std::size_t embedding_dim = 0;
  std::size_t heads_hidden = 16;
  std::size_t heads_out = 4;
  std::size_t head_width = 4;
  std::size_t fused_heads_hidden = 4;
  std::size_t fused_heads_out = 4;
  double leaky_slope = 0.2;
  double dropout = 0.5;
  double attn_dropout = 0.6;
  std::size_t lgn_layers = 2;
  std::size_t lgn_width = 4;
  std::size_t mlp_hidden = 4;
  LossWeights loss_weights;
  bool ensemble_heads = false;  // predict from mean(ŷ, ŷ') instead of ŷ' alone

  void validate() const {
    if (embedding_dim == 0) throw ConfigError("embedding_dim must be positive");
    if (heads_hidden == 0 || heads_out == 0 || fused_heads_hidden == 0 || fused_heads_out == 0)
      throw ConfigError("head counts must be positive");
    if (head_width == 0 || lgn_width == 0 || mlp_hidden == 0) throw ConfigError("widths must be positive");
    if (lgn_layers == 0) throw ConfigError("lgn_layers must be positive");
    if (lgn_width != head_width) {
      throw ConfigError("lgn_width must equal head_width so local and global features can be added");
    }
    if (!(dropout >= 0.0 && dropout < 1.0) || !(attn_dropout >= 0.0 && attn_dropout < 1.0))
      throw ConfigError("dropout rates must lie in [0, 1)");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
    loss_weights.validate();
  }
};

template <typename T>
struct ModelT {
  GgnT<T> ggn;
  LgnT<T> lgn;
  GgnT<T> fused;
  SharedMlpT<T> mlp;
};

using ModelParams = ModelT<Matrix>;

/// Visits every trainable tensor in a fixed order with a stable name.
template <typename T, typename F>
void for_each_tensor(ModelT<T>& m, F&& fn) {
  for_each_tensor(m.ggn, "ggn", fn);
  for_each_tensor(m.lgn, "lgn", fn);
  for_each_tensor(m.fused, "fused", fn);
  for_each_tensor(m.mlp, "mlp", fn);
}

inline std::vector<Matrix*> parameter_list(ModelParams& m) {
  std::vector<Matrix*> out;
  for_each_tensor(m, [&](const std::string&, Matrix& x) { out.push_back(&x); });
  return out;
}

inline std::vector<std::string> parameter_names(ModelParams& m) {
  std::vector<std::string> out;
  for_each_tensor(m, [&](const std::string& name, Matrix&) { out.push_back(name); });
  return out;
}

inline std::size_t parameter_count(const ModelParams& m) {
  std::size_t n = 0;
  for_each_tensor(const_cast<ModelParams&>(m), [&](const std::string&, Matrix& x) { n += x.size(); });
  return n;
}

inline ModelParams init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams m;
  m.ggn = init_ggn(ggn_layer_configs(cfg.embedding_dim, cfg.heads_hidden, cfg.heads_out, cfg.head_width,
                                     cfg.leaky_slope, cfg.attn_dropout, cfg.dropout),
                   rng);
  m.lgn = init_lgn(cfg.head_width, cfg.lgn_width, cfg.lgn_layers, cfg.dropout, rng);
  m.fused = init_ggn(ggn_layer_configs(cfg.head_width, cfg.fused_heads_hidden, cfg.fused_heads_out,
                                       cfg.head_width, cfg.leaky_slope, cfg.attn_dropout, cfg.dropout),
                     rng);
  m.mlp = init_shared_mlp(cfg.head_width, cfg.mlp_hidden, rng);
  return m;
}

/// Overrides the dropout rates stored in the layer configs (e.g. to disable
/// them for gradient checks).
inline void set_dropout(ModelParams& m, double dropout, double attn_dropout) {
  for (auto* g : {&m.ggn, &m.fused}) {
    for (std::size_t l = 0; l < g->layers.size(); ++l) {
      g->layers[l].config.attn_dropout = attn_dropout;
      if (l > 0) g->layers[l].config.feat_dropout = dropout;
    }
  }
  m.lgn.dropout = dropout;
}

namespace ad {

inline ModelT<Var> bind(Tape& t, const ModelParams& p, bool requires_grad = true) {
  return {bind(t, p.ggn, requires_grad), bind(t, p.lgn, requires_grad), bind(t, p.fused, requires_grad),
          bind(t, p.mlp, requires_grad)};
}

struct ModelForward {
  Var global_h;       // H^L, 9 x 4
  Var global_probs;   // ŷ, 4 x 1
  std::array<FingerprintVars, kSlotCount> fingerprints;
  Var local_probs;    // 4 x 1, one per sub-graph
  Var fused_e;        // E, 9 x 4
  Var fused_probs;    // ŷ', 4 x 1
  Var loss_global;
  Var loss_local;
  Var loss_fused;
  Var loss_total;
};

/// Full pass: global attention, local sub-graph GCN, fusion, and the three
/// losses against `label`.
inline ModelForward model_forward(Tape& t, const ModelT<Var>& m, const InsertionGraph& g, int label,
                                  const LossWeights& w, Rng* rng, bool training) {
  ModelForward f;
  const Matrix nbr = neighborhood_mask(g);
  f.global_h = ggn_forward(t, t.constant(g.features), m.ggn, nbr, rng, training);
  f.global_probs = slot_readout(t, f.global_h, m.mlp, g);

  const Var adjacency = t.constant(normalized_adjacency(3, {{0, 1}, {1, 2}}));
  std::vector<Var> local_probs;
  std::vector<Var> last_layers;
  for (std::size_t k = 0; k < kSlotCount; ++k) {
    Matrix select(3, g.node_count());
    const auto roles = subgraph_roles(k);
    for (std::size_t r = 0; r < 3; ++r) select(r, g.index_of(roles[r])) = 1.0;
    const Var sub_features = matmul(t, t.constant(std::move(select)), f.global_h);
    f.fingerprints[k] = wl_fingerprints(t, sub_features, adjacency, m.lgn, rng, training);
    local_probs.push_back(classify_subgraph(t, f.fingerprints[k].concat, m.lgn.head));
    last_layers.push_back(f.fingerprints[k].layers.back());
  }
  f.local_probs = concat_rows(t, local_probs);

  f.fused_e = fuse(t, f.global_h, last_layers, g);
  f.fused_probs = fused_forward(t, f.fused_e, m.fused, m.mlp, g, rng, training);

  const Matrix y = one_hot_column(label);
  f.loss_global = bce(t, f.global_probs, y);
  f.loss_local = bce(t, f.local_probs, y);
  f.loss_fused = bce(t, f.fused_probs, y);
  const Var losses[] = {f.loss_global, f.loss_local, f.loss_fused};
  const double weights[] = {w.alpha, w.beta, w.gamma};
  f.loss_total = weighted_sum(t, losses, weights);
  return f;
}

}  // namespace ad

struct ModelOutput {
  std::array<double, kSlotCount> global_probs{};
  std::array<double, kSlotCount> local_probs{};
  std::array<double, kSlotCount> fused_probs{};
  double loss_global = 0.0;
  double loss_local = 0.0;
  double loss_fused = 0.0;
  double loss_total = 0.0;
};

struct ModelGradients {
  ModelOutput output;
  std::vector<Matrix> grads;  // aligned with parameter_list()
};

namespace detail {

inline std::array<double, kSlotCount> column4(const Matrix& m) { return {m[0], m[1], m[2], m[3]}; }

inline ModelOutput collect(const ad::Tape& t, const ad::ModelForward& f) {
  ModelOutput o;
  o.global_probs = column4(t.value(f.global_probs));
  o.local_probs = column4(t.value(f.local_probs));
  o.fused_probs = column4(t.value(f.fused_probs));
  o.loss_global = t.value(f.loss_global)(0, 0);
  o.loss_local = t.value(f.loss_local)(0, 0);
  o.loss_fused = t.value(f.loss_fused)(0, 0);
  o.loss_total = t.value(f.loss_total)(0, 0);
  return o;
}

}  // namespace detail

inline ModelOutput run_model(const ModelParams& params, const EmbeddedProblem& p, const LossWeights& w,
                             Rng* rng, bool training) {
  const InsertionGraph g = build_insertion_graph(p);
  ad::Tape t;
  const auto vars = ad::bind(t, params, false);
  return detail::collect(t, ad::model_forward(t, vars, g, p.label, w, rng, training));
}

inline ModelGradients model_gradients(const ModelParams& params, const EmbeddedProblem& p,
                                      const LossWeights& w, Rng* rng, bool training) {
  const InsertionGraph g = build_insertion_graph(p);
  ad::Tape t;
  auto vars = ad::bind(t, params, true);
  const auto f = ad::model_forward(t, vars, g, p.label, w, rng, training);
  t.backward(f.loss_total);
  ModelGradients out;
  out.output = detail::collect(t, f);
  for_each_tensor(vars, [&](const std::string&, ad::Var& v) { out.grads.push_back(t.grad(v)); });
  return out;
}

inline int predict(const ModelParams& params, const EmbeddedProblem& p, bool ensemble_heads = false) {
  const ModelOutput o = run_model(params, p, LossWeights{}, nullptr, false);
  if (!ensemble_heads) return predict_slot(o.fused_probs);
  std::array<double, kSlotCount> mixed{};
  for (std::size_t k = 0; k < kSlotCount; ++k) mixed[k] = 0.5 * (o.global_probs[k] + o.fused_probs[k]);
  return predict_slot(mixed);
}

}  // namespace sentinsert
