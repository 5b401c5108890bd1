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

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "sentinsert/errors.hpp"
#include "sentinsert/model.hpp"

namespace sentinsert {

/// Every knob of a run. Defaults reproduce the published training recipe, so
/// an empty config file is a complete configuration.
struct RunConfig {
  std::uint64_t seed = 1234;
  double lr = 1e-4;
  std::size_t epochs = 100;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  double attn_dropout = 0.6;
  double leaky_slope = 0.2;
  std::size_t heads_hidden = 16;
  std::size_t heads_out = 4;
  std::size_t head_width = 4;
  LossWeights loss_weights;
  double val_ratio = 0.05;
  std::size_t embedding_dim = 0;  // 0: take it from the embedding file
  double msv_theta = 0.3;
  bool ensemble_heads = false;

  // data synthesis
  std::size_t word_threshold = 100;
  std::size_t problems_per_abstract = 1;

  // topological-sort baseline
  std::size_t toposort_epochs = 20;
  double toposort_lr = 1e-3;
  std::size_t toposort_hidden = 16;

  // paths
  std::string problems;
  std::string embeddings;
  std::string target_problems;
  std::string target_embeddings;
  std::string model;
  std::string corpus;
  std::string out;

  ModelConfig model_config(std::size_t dim) const {
    ModelConfig m;
    m.embedding_dim = dim;
    m.heads_hidden = heads_hidden;
    m.heads_out = heads_out;
    m.head_width = head_width;
    m.lgn_width = head_width;
    m.leaky_slope = leaky_slope;
    m.dropout = dropout;
    m.attn_dropout = attn_dropout;
    m.loss_weights = loss_weights;
    m.ensemble_heads = ensemble_heads;
    return m;
  }

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (!(val_ratio > 0.0 && val_ratio < 1.0)) throw ConfigError("val_ratio must lie in (0, 1)");
    if (!(dropout >= 0.0 && dropout < 1.0) || !(attn_dropout >= 0.0 && attn_dropout < 1.0))
      throw ConfigError("dropout rates must lie in [0, 1)");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
    if (problems_per_abstract == 0) throw ConfigError("problems_per_abstract must be positive");
    loss_weights.validate();
  }
};

/// Applies the keys present in `j` on top of `cfg`. Unknown keys are errors.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "seed", "lr", "epochs", "weight_decay", "dropout", "attn_dropout", "leaky_slope", "heads_hidden",
      "heads_out", "head_width", "loss_weights", "val_ratio", "embedding_dim", "msv_theta",
      "ensemble_heads", "word_threshold", "problems_per_abstract", "toposort_epochs", "toposort_lr",
      "toposort_hidden", "problems", "embeddings", "target_problems", "target_embeddings", "model",
      "corpus", "out"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", cfg.seed);
    get("lr", cfg.lr);
    get("epochs", cfg.epochs);
    get("weight_decay", cfg.weight_decay);
    get("dropout", cfg.dropout);
    get("attn_dropout", cfg.attn_dropout);
    get("leaky_slope", cfg.leaky_slope);
    get("heads_hidden", cfg.heads_hidden);
    get("heads_out", cfg.heads_out);
    get("head_width", cfg.head_width);
    get("val_ratio", cfg.val_ratio);
    get("embedding_dim", cfg.embedding_dim);
    get("msv_theta", cfg.msv_theta);
    get("ensemble_heads", cfg.ensemble_heads);
    get("word_threshold", cfg.word_threshold);
    get("problems_per_abstract", cfg.problems_per_abstract);
    get("toposort_epochs", cfg.toposort_epochs);
    get("toposort_lr", cfg.toposort_lr);
    get("toposort_hidden", cfg.toposort_hidden);
    get("problems", cfg.problems);
    get("embeddings", cfg.embeddings);
    get("target_problems", cfg.target_problems);
    get("target_embeddings", cfg.target_embeddings);
    get("model", cfg.model);
    get("corpus", cfg.corpus);
    get("out", cfg.out);
    if (j.contains("loss_weights")) {
      const auto& w = j.at("loss_weights");
      if (w.is_array()) {
        if (w.size() != 3) throw ConfigError("loss_weights array must have 3 entries");
        cfg.loss_weights = {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()};
      } else {
        cfg.loss_weights.alpha = w.value("alpha", cfg.loss_weights.alpha);
        cfg.loss_weights.beta = w.value("beta", cfg.loss_weights.beta);
        cfg.loss_weights.gamma = w.value("gamma", cfg.loss_weights.gamma);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  RunConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  apply_config_json(cfg, j);
  return cfg;
}

}  // namespace sentinsert
