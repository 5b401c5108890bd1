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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentinsert/adam.hpp"
#include "sentinsert/config.hpp"
#include "sentinsert/dataset.hpp"
#include "sentinsert/errors.hpp"
#include "sentinsert/gradcheck.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/model.hpp"
#include "sentinsert/rng.hpp"

// Training loop, evaluation, and the cross-domain protocol.
namespace sentinsert {

struct Metrics {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::array<double, kSlotCount> per_label_accuracy{};
  std::array<std::size_t, kSlotCount> label_counts{};
  std::vector<double> loss_curve;          // mean training loss per epoch
  std::vector<double> val_accuracy_curve;  // per epoch, when a validation set exists
  bool loss_warning = false;               // training loss rose after epoch 10
};

using Predictor = std::function<int(const EmbeddedProblem&)>;

inline Metrics evaluate_with(std::span<const EmbeddedProblem> problems, const Predictor& predict_fn) {
  Metrics m;
  std::array<std::size_t, kSlotCount> hits{};
  for (const auto& p : problems) {
    const auto label = static_cast<std::size_t>(p.label);
    ++m.label_counts.at(label);
    if (predict_fn(p) == p.label) {
      ++hits[label];
      ++m.correct;
    }
  }
  m.total = problems.size();
  m.accuracy = m.total ? static_cast<double>(m.correct) / static_cast<double>(m.total) : 0.0;
  for (std::size_t k = 0; k < kSlotCount; ++k)
    m.per_label_accuracy[k] =
        m.label_counts[k] ? static_cast<double>(hits[k]) / static_cast<double>(m.label_counts[k]) : 0.0;
  return m;
}

/// Inference-mode accuracy; never touches the parameters.
inline Metrics evaluate(std::span<const EmbeddedProblem> problems, const ModelParams& params,
                        bool ensemble_heads = false) {
  return evaluate_with(problems, [&](const EmbeddedProblem& p) { return predict(params, p, ensemble_heads); });
}

struct TrainResult {
  ModelConfig model_config;
  ModelParams params;
  Metrics train_metrics;  // final-epoch accuracy on the training set, plus curves
  Metrics val_metrics;    // final-epoch accuracy on the validation set
};

inline std::size_t dataset_dim(std::span<const EmbeddedProblem> problems) {
  if (problems.empty()) return 0;
  const std::size_t d = problems.front().dim();
  for (const auto& p : problems) {
    p.validate();
    if (p.dim() != d) throw ConfigError("problem " + p.id + " has dim " + std::to_string(p.dim()) +
                                        ", expected " + std::to_string(d));
  }
  return d;
}

/// Per-problem Adam updates over `cfg.epochs` epochs; returns final-epoch
/// parameters.
inline TrainResult train(std::span<const EmbeddedProblem> train_set, std::span<const EmbeddedProblem> val_set,
                         const RunConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  const std::size_t dim = dataset_dim(train_set);
  if (cfg.embedding_dim != 0 && cfg.embedding_dim != dim) {
    throw ConfigError("training data dim " + std::to_string(dim) + " != configured embedding_dim " +
                      std::to_string(cfg.embedding_dim));
  }
  if (!val_set.empty() && dataset_dim(val_set) != dim) throw ConfigError("validation dim differs from training dim");

  const Rng root(cfg.seed);
  Rng init_rng = root.derive(0);
  Rng order_rng = root.derive(1);
  Rng dropout_rng = root.derive(2);

  TrainResult result;
  result.model_config = cfg.model_config(dim);
  result.params = init_model(result.model_config, init_rng);
  auto params = parameter_list(result.params);

  AdamOptions opts;
  opts.lr = cfg.lr;
  opts.weight_decay = cfg.weight_decay;
  std::vector<AdamState> states;
  states.reserve(params.size());
  for (Matrix* p : params) states.emplace_back(*p, opts);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Metrics& tm = result.train_metrics;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto g = model_gradients(result.params, train_set[idx], cfg.loss_weights, &dropout_rng, true);
      total += g.output.loss_total;
      for (std::size_t k = 0; k < params.size(); ++k) adam_step(*params[k], g.grads[k], states[k]);
    }
    tm.loss_curve.push_back(total / static_cast<double>(train_set.size()));
    if (!val_set.empty()) tm.val_accuracy_curve.push_back(evaluate(val_set, result.params, cfg.ensemble_heads).accuracy);
    if (epoch > 10 && tm.loss_curve[epoch] > tm.loss_curve[epoch - 1]) tm.loss_warning = true;
  }

  const auto curve = tm.loss_curve;
  const auto val_curve = tm.val_accuracy_curve;
  const bool warning = tm.loss_warning;
  tm = evaluate(train_set, result.params, cfg.ensemble_heads);
  tm.loss_curve = curve;
  tm.val_accuracy_curve = val_curve;
  tm.loss_warning = warning;
  if (!val_set.empty()) result.val_metrics = evaluate(val_set, result.params, cfg.ensemble_heads);
  return result;
}

struct CrossDomainResult {
  TrainResult source;
  Metrics target;
};

/// Train on the source domain, then score the untouched target set.
inline CrossDomainResult cross_domain(std::span<const EmbeddedProblem> source_train,
                                      std::span<const EmbeddedProblem> source_val,
                                      std::span<const EmbeddedProblem> target, const RunConfig& cfg) {
  const std::size_t source_dim = dataset_dim(source_train);
  const std::size_t target_dim = dataset_dim(target);
  if (!target.empty() && source_dim != target_dim) {
    throw ConfigError("source dim " + std::to_string(source_dim) + " != target dim " + std::to_string(target_dim));
  }
  CrossDomainResult r;
  r.source = train(source_train, source_val, cfg);
  r.target = evaluate(target, r.source.params, cfg.ensemble_heads);
  return r;
}

// ---------------------------------------------------------------------------
// Model files: JSON with the architecture and every tensor by name.

inline nlohmann::json model_to_json(const ModelConfig& cfg, const ModelParams& params) {
  nlohmann::json j;
  j["format"] = "sentinsert-model";
  j["version"] = 1;
  j["config"] = {{"embedding_dim", cfg.embedding_dim}, {"heads_hidden", cfg.heads_hidden},
                 {"heads_out", cfg.heads_out},         {"head_width", cfg.head_width},
                 {"fused_heads_hidden", cfg.fused_heads_hidden},
                 {"fused_heads_out", cfg.fused_heads_out},
                 {"leaky_slope", cfg.leaky_slope},     {"dropout", cfg.dropout},
                 {"attn_dropout", cfg.attn_dropout},   {"lgn_layers", cfg.lgn_layers},
                 {"lgn_width", cfg.lgn_width},         {"mlp_hidden", cfg.mlp_hidden},
                 {"ensemble_heads", cfg.ensemble_heads}};
  nlohmann::json tensors = nlohmann::json::object();
  for_each_tensor(const_cast<ModelParams&>(params), [&](const std::string& name, Matrix& m) {
    tensors[name] = {{"rows", m.rows()}, {"cols", m.cols()},
                     {"data", std::vector<double>(m.data().begin(), m.data().end())}};
  });
  j["tensors"] = std::move(tensors);
  return j;
}

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
};

inline LoadedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "sentinsert-model") throw FormatError("not a sentinsert model file");
    const auto& c = j.at("config");
    LoadedModel out;
    ModelConfig& cfg = out.config;
    cfg.embedding_dim = c.at("embedding_dim");
    cfg.heads_hidden = c.at("heads_hidden");
    cfg.heads_out = c.at("heads_out");
    cfg.head_width = c.at("head_width");
    cfg.fused_heads_hidden = c.at("fused_heads_hidden");
    cfg.fused_heads_out = c.at("fused_heads_out");
    cfg.leaky_slope = c.at("leaky_slope");
    cfg.dropout = c.at("dropout");
    cfg.attn_dropout = c.at("attn_dropout");
    cfg.lgn_layers = c.at("lgn_layers");
    cfg.lgn_width = c.at("lgn_width");
    cfg.mlp_hidden = c.at("mlp_hidden");
    cfg.ensemble_heads = c.at("ensemble_heads");
    Rng dummy(0);
    out.params = init_model(cfg, dummy);
    const auto& tensors = j.at("tensors");
    for_each_tensor(out.params, [&](const std::string& name, Matrix& m) {
      const auto& t = tensors.at(name);
      if (t.at("rows") != m.rows() || t.at("cols") != m.cols()) {
        throw FormatError("tensor " + name + " has the wrong shape");
      }
      m = Matrix(m.rows(), m.cols(), t.at("data").get<std::vector<double>>());
    });
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const ModelConfig& cfg, const ModelParams& params) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path);
  out << model_to_json(cfg, params).dump() << '\n';
  if (!out) throw IoError("write failed for " + path);
}

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

/// Gradient check of the full model loss on a random d-dimensional problem
/// with dropout disabled.
inline GradcheckResult run_gradcheck(std::size_t dim, std::size_t probes, double eps, std::uint64_t seed) {
  const Rng root(seed);
  Rng init = root.derive(0);
  Rng data = root.derive(1);
  Rng probe = root.derive(2);
  ModelConfig cfg;
  cfg.embedding_dim = dim;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  ModelParams params = init_model(cfg, init);
  const EmbeddedProblem p = random_problem(dim, data, "gradcheck");
  const auto g = model_gradients(params, p, cfg.loss_weights, nullptr, false);
  auto list = parameter_list(params);
  const auto report = grad_check(
      [&] { return run_model(params, p, cfg.loss_weights, nullptr, false).loss_total; }, list, g.grads, probes,
      eps, probe);
  return {report.max_rel_error, report.probes.size()};
}

}  // namespace sentinsert
