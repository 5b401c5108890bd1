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

#include <gtest/gtest.h>

#include <cmath>

#include "sentinsert/fusion.hpp"
#include "sentinsert/gradcheck.hpp"
#include "sentinsert/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace sentinsert {
namespace {

using testing::make_embedded;
using testing::random_matrix;

std::array<Fingerprints, kSlotCount> random_fingerprints(Rng& rng, double scale = 1.0) {
  std::array<Fingerprints, kSlotCount> out;
  for (auto& f : out) {
    f.layers = {random_matrix(3, 4, rng, scale), random_matrix(3, 4, rng, scale)};
    f.concat = concat_cols(std::span<const Matrix>(f.layers));
  }
  return out;
}

TEST(Fuse, MembershipAveraging) {
  Rng rng(1);
  const auto g = build_insertion_graph(make_embedded(3, rng, 0));
  const Matrix H = random_matrix(9, 4, rng);
  const auto fp = random_fingerprints(rng);
  const auto state = fuse(H, fp, g);
  EXPECT_EQ(state.membership_counts, (std::vector<std::size_t>{1, 2, 2, 2, 1, 1, 1, 1, 1}));
  for (std::size_t c = 0; c < 4; ++c) {
    // c1 appears only as the left node of sub-graph A.
    EXPECT_NEAR(state.E(0, c), H(0, c) + fp[0].layers[1](0, c), 1e-15);
    // c3 is the right node of B and the left node of C.
    EXPECT_NEAR(state.E(2, c), H(2, c) + 0.5 * (fp[1].layers[1](2, c) + fp[2].layers[1](0, c)), 1e-15);
    // c5 is the right node of D; slot nodes are middles.
    EXPECT_NEAR(state.E(4, c), H(4, c) + fp[3].layers[1](2, c), 1e-15);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(state.E(5 + k, c), H(5 + k, c) + fp[k].layers[1](1, c), 1e-15);
  }
}

TEST(Fuse, ZeroFingerprintsIsIdentity) {
  Rng rng(2);
  const auto g = build_insertion_graph(make_embedded(3, rng, 0));
  const Matrix H = random_matrix(9, 4, rng);
  const auto fp = random_fingerprints(rng, 0.0);
  EXPECT_EQ(fuse(H, fp, g).E, H);
}

TEST(Fuse, WidthMismatchThrows) {
  Rng rng(3);
  const auto g = build_insertion_graph(make_embedded(3, rng, 0));
  auto fp = random_fingerprints(rng);
  fp[2].layers[1] = Matrix(3, 5);
  EXPECT_THROW(fuse(random_matrix(9, 4, rng), fp, g), ShapeError);
}

TEST(FusedForward, MatchesStraightLineOracle) {
  Rng rng(4);
  ModelConfig cfg;
  cfg.embedding_dim = 2;
  const auto params = init_model(cfg, rng);
  const auto g = build_insertion_graph(make_embedded(2, rng, 0));
  const Matrix E = random_matrix(9, 4, rng);
  std::vector<std::vector<std::size_t>> nbrs;
  for (std::size_t i = 0; i < 9; ++i) nbrs.push_back(neighborhood(g, i));
  Matrix h = E;
  for (const auto& layer : params.fused.layers) h = testing::oracle_layer(h, layer, nbrs);
  const auto expected = testing::oracle_readout(h, params.mlp, 5);
  const auto got = fused_forward(E, params.fused, params.mlp, g, nullptr, false);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(got[k], expected[k], 1e-10);
    EXPECT_GT(got[k], 0.0);
    EXPECT_LT(got[k], 1.0);
  }
}

TEST(FusedForward, ReadoutIsSharedWithGlobalBranch) {
  Rng rng(5);
  ModelConfig cfg;
  cfg.embedding_dim = 4;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  const auto params = init_model(cfg, rng);
  const auto p = make_embedded(4, rng, 2);
  const auto g = build_insertion_graph(p);
  // One SharedMlp object feeds both readouts, so their gradients add up in it.
  ad::Tape t;
  auto vars = ad::bind(t, params, true);
  const auto f = ad::model_forward(t, vars, g, p.label, LossWeights{}, nullptr, false);
  t.backward(f.loss_global);
  const Matrix from_global = t.grad(vars.mlp.w1);
  ad::Tape t2;
  auto vars2 = ad::bind(t2, params, true);
  const auto f2 = ad::model_forward(t2, vars2, g, p.label, LossWeights{}, nullptr, false);
  t2.backward(f2.loss_fused);
  const Matrix from_fused = t2.grad(vars2.mlp.w1);
  ad::Tape t3;
  auto vars3 = ad::bind(t3, params, true);
  const auto f3 = ad::model_forward(t3, vars3, g, p.label, LossWeights{1.0, 0.0, 1.0}, nullptr, false);
  t3.backward(f3.loss_total);
  EXPECT_GT(max_abs_diff(from_global, Matrix(4, 4)), 0.0);
  EXPECT_GT(max_abs_diff(from_fused, Matrix(4, 4)), 0.0);
  EXPECT_LE(max_abs_diff(t3.grad(vars3.mlp.w1), from_global + from_fused), 1e-14);
}

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss(0.3, 0.9, 0.7, {0, 0, 1}), 0.7);
  EXPECT_NEAR(total_loss(1, 1, 1, LossWeights{}), 1.4, 1e-15);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    const LossWeights w{rng.uniform(), rng.uniform(), rng.uniform()};
    EXPECT_EQ(total_loss(a, b, c, w), w.alpha * a + w.beta * b + w.gamma * c);
  }
  EXPECT_THROW((LossWeights{-0.1, 0.2, 1.0}).validate(), ConfigError);
}

TEST(TotalLoss, FusedOnlyWeightsGiveFusedLoss) {
  Rng rng(7);
  ModelConfig cfg;
  cfg.embedding_dim = 5;
  const auto params = init_model(cfg, rng);
  for (int label = 0; label < 4; ++label) {
    const auto p = make_embedded(5, rng, label);
    const auto o = run_model(params, p, {0, 0, 1}, nullptr, false);
    EXPECT_EQ(o.loss_total, o.loss_fused);
    const auto d = run_model(params, p, LossWeights{}, nullptr, false);
    EXPECT_NEAR(d.loss_total, 0.2 * d.loss_global + 0.2 * d.loss_local + d.loss_fused, 1e-15);
  }
}

TEST(TotalLoss, ZeroWeightRemovesGradientFlow) {
  Rng rng(8);
  ModelConfig cfg;
  cfg.embedding_dim = 5;
  auto params = init_model(cfg, rng);
  const auto p = make_embedded(5, rng, 1);
  const auto names = parameter_names(params);
  auto max_abs = [](const Matrix& m) {
    double x = 0.0;
    for (double v : m.data()) x = std::max(x, std::abs(v));
    return x;
  };
  // Without the local loss, the local classification head gets no gradient.
  const auto no_local = model_gradients(params, p, {1, 0, 1}, nullptr, false);
  // Without the fused loss, the fusion network gets no gradient.
  const auto no_fused = model_gradients(params, p, {1, 1, 0}, nullptr, false);
  std::size_t head_tensors = 0, fused_tensors = 0;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k].rfind("lgn.fc", 0) == 0) {
      ++head_tensors;
      EXPECT_EQ(max_abs(no_local.grads[k]), 0.0) << names[k];
    }
    if (names[k].rfind("fused.", 0) == 0) {
      ++fused_tensors;
      EXPECT_EQ(max_abs(no_fused.grads[k]), 0.0) << names[k];
    }
  }
  EXPECT_EQ(head_tensors, 2u);
  EXPECT_GT(fused_tensors, 0u);
}

TEST(TotalLoss, EndToEndGradientCheck) {
  Rng rng(9);
  ModelConfig cfg;
  cfg.embedding_dim = 8;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  auto params = init_model(cfg, rng);
  const auto p = make_embedded(8, rng, 3);
  const auto g = model_gradients(params, p, cfg.loss_weights, nullptr, false);
  auto list = parameter_list(params);
  Rng probe(10);
  const auto report = grad_check([&] { return run_model(params, p, cfg.loss_weights, nullptr, false).loss_total; },
                                 list, g.grads, 200, 1e-6, probe);
  EXPECT_LE(report.max_rel_error, 1e-4);
}

TEST(PredictSlot, Examples) {
  EXPECT_EQ(predict_slot({0.1, 0.9, 0.2, 0.3}), 1);
  EXPECT_EQ(predict_slot({0.4, 0.4, 0.4, 0.4}), 0);
  EXPECT_EQ(predict_slot({0.1, 0.7, 0.7, 0.3}), 1);
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::array<double, 4> p{}, q{};
    for (std::size_t k = 0; k < 4; ++k) {
      p[k] = rng.uniform(0.01, 0.99);
      q[k] = std::log(p[k] / (1 - p[k])) * 3.0 + 7.0;
    }
    EXPECT_EQ(predict_slot(p), predict_slot(q));
  }
}

}  // namespace
}  // namespace sentinsert
