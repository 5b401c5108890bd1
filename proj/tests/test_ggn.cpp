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
#include <numbers>
#include <vector>

#include "sentinsert/ggn.hpp"
#include "sentinsert/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace sentinsert {
namespace {

using testing::make_embedded;
using testing::random_matrix;
using testing::leaky;
using testing::oracle_layer;

// Three-node chain c1 -> A -> c2, used for hand calculations.
InsertionGraph chain(const Matrix& features) {
  InsertionGraph g;
  g.roles = {NodeRole::c1, NodeRole::A, NodeRole::c2};
  g.edges = {{0, 1}, {1, 2}};
  g.features = features;
  return g;
}

GatLayerParams identity_layer(std::size_t width, Matrix attn) {
  GatLayerParams p;
  p.config.in_width = width;
  p.config.heads = 1;
  p.config.head_width = width;
  p.config.merge = HeadMerge::average;
  p.config.activation = Activation::identity();
  p.config.residual = false;
  p.W.push_back(Matrix::identity(width));
  p.attn.push_back(std::move(attn));
  return p;
}

TEST(Attention, HandComputedChain) {
  const Matrix H{{0.3, -1.2}, {2.0, 0.5}, {-0.7, 0.9}};
  const auto g = chain(H);
  const auto layer = identity_layer(2, Matrix{{1}, {0}, {0}, {1}});
  const Matrix alpha = attention_weights(H, layer, g, 0, nullptr, false);
  const std::vector<std::vector<std::size_t>> nbrs = {{0, 1}, {0, 1, 2}, {1, 2}};
  for (std::size_t i = 0; i < 3; ++i) {
    double z = 0.0;
    for (std::size_t j : nbrs[i]) z += std::exp(leaky(H(i, 0) + H(j, 1), 0.2));
    for (std::size_t j = 0; j < 3; ++j) {
      const bool in = std::find(nbrs[i].begin(), nbrs[i].end(), j) != nbrs[i].end();
      const double expected = in ? std::exp(leaky(H(i, 0) + H(j, 1), 0.2)) / z : 0.0;
      EXPECT_NEAR(alpha(i, j), expected, 1e-12);
    }
  }
}

TEST(Attention, SingletonNeighborhood) {
  InsertionGraph g;
  g.roles = {NodeRole::c1};
  g.features = Matrix{{1.0, 2.0}};
  const auto layer = identity_layer(2, Matrix{{0.3}, {-0.1}, {0.5}, {0.2}});
  EXPECT_EQ(attention_weights(g.features, layer, g, 0, nullptr, false)(0, 0), 1.0);
}

TEST(Attention, IdenticalNeighborsGetEqualWeight) {
  const Matrix H{{1.0, 2.0}, {5.0, -3.0}, {1.0, 2.0}};
  const auto g = chain(H);
  Rng rng(1);
  const auto layer = identity_layer(2, random_matrix(4, 1, rng));
  const Matrix alpha = attention_weights(H, layer, g, 0, nullptr, false);
  EXPECT_NEAR(alpha(1, 0), alpha(1, 2), 1e-15);
  const Matrix twin{{1.0, 2.0}, {1.0, 2.0}, {0.0, 0.0}};
  const Matrix a2 = attention_weights(twin, layer, chain(twin), 0, nullptr, false);
  EXPECT_DOUBLE_EQ(a2(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(a2(0, 1), 0.5);
}

TEST(Attention, RowsSumToOneInInference) {
  Rng rng(2);
  ModelConfig cfg;
  cfg.embedding_dim = 8;
  const auto params = init_model(cfg, rng);
  const auto p = make_embedded(8, rng, 1);
  const auto g = build_insertion_graph(p);
  Matrix H = g.features;
  for (const auto& layer : params.ggn.layers) {
    for (std::size_t h = 0; h < layer.config.heads; ++h) {
      const Matrix a = attention_weights(H, layer, g, h, nullptr, false);
      const Matrix mask = neighborhood_mask(g);
      for (std::size_t i = 0; i < 9; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 9; ++j) {
          if (mask(i, j) == 0.0) {
            EXPECT_EQ(a(i, j), 0.0);
          }
          s += a(i, j);
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
    H = gat_layer(H, layer, g, nullptr, false);
  }
}

TEST(Attention, DropoutRenormalisesSurvivors) {
  Rng rng(3);
  ModelConfig cfg;
  cfg.embedding_dim = 4;
  const auto params = init_model(cfg, rng);
  const auto g = build_insertion_graph(make_embedded(4, rng, 0));
  Rng drop(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = attention_weights(g.features, params.ggn.layers[0], g, 0, &drop, true);
    for (std::size_t i = 0; i < 9; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) s += a(i, j);
      EXPECT_TRUE(std::abs(s - 1.0) < 1e-9 || s == 0.0);
    }
  }
}

TEST(Attention, ShiftInvariance) {
  // Adding a constant to every score of a node leaves its weights unchanged:
  // with W = I and a source-only attention vector on a positive regime, the
  // source term is such a constant.
  const Matrix H{{3.0, 1.0}, {5.0, 2.0}, {4.0, 0.5}};
  const auto a = attention_weights(H, identity_layer(2, Matrix{{0}, {0}, {0}, {1}}), chain(H), 0, nullptr, false);
  const auto b = attention_weights(H, identity_layer(2, Matrix{{1}, {0}, {0}, {1}}), chain(H), 0, nullptr, false);
  EXPECT_LE(max_abs_diff(a, b), 1e-14);
  const auto c = attention_weights(H, identity_layer(2, Matrix{{0}, {0}, {0}, {3}}), chain(H), 0, nullptr, false);
  EXPECT_GT(max_abs_diff(a, c), 1e-3);
}

TEST(GatLayer, UniformAttentionAverages) {
  Rng rng(4);
  const Matrix H = random_matrix(3, 2, rng);
  const auto g = chain(H);
  const Matrix out = gat_layer(H, identity_layer(2, Matrix(4, 1)), g, nullptr, false);
  const std::vector<std::vector<std::size_t>> nbrs = {{0, 1}, {0, 1, 2}, {1, 2}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double s = 0.0;
      for (std::size_t j : nbrs[i]) s += H(j, c);
      EXPECT_NEAR(out(i, c), s / static_cast<double>(nbrs[i].size()), 1e-12);
    }
}

TEST(GatLayer, ZeroInputGivesZeroOutput) {
  Rng rng(5);
  ModelConfig cfg;
  cfg.embedding_dim = 6;
  const auto params = init_model(cfg, rng);
  auto p = make_embedded(6, rng, 0);
  for (auto& part : p.parts) part.assign(6, 0.0);
  p.question.assign(6, 0.0);
  const auto H = ggn_forward(build_insertion_graph(p), params.ggn, nullptr, false);
  for (double x : H.data()) EXPECT_EQ(x, 0.0);
}

TEST(GatLayer, WidthsFollowHeadConvention) {
  Rng rng(6);
  ModelConfig cfg;
  cfg.embedding_dim = 10;
  const auto params = init_model(cfg, rng);
  ASSERT_EQ(params.ggn.layers.size(), 2u);
  EXPECT_EQ(params.ggn.layers[0].config.out_width(), 64u);
  EXPECT_EQ(params.ggn.layers[1].config.out_width(), 4u);
  const auto g = build_insertion_graph(make_embedded(10, rng, 2));
  const Matrix h1 = gat_layer(g.features, params.ggn.layers[0], g, nullptr, false);
  EXPECT_EQ(h1.cols(), 64u);
  const Matrix h2 = ggn_forward(g, params.ggn, nullptr, false);
  EXPECT_EQ(h2.rows(), 9u);
  EXPECT_EQ(h2.cols(), 4u);
  EXPECT_EQ(params.fused.layers[0].config.out_width(), 16u);
  EXPECT_EQ(params.fused.layers[1].config.out_width(), 4u);
}

TEST(GgnForward, MatchesStraightLineOracle) {
  Rng rng(7);
  ModelConfig cfg;
  cfg.embedding_dim = 2;
  const auto params = init_model(cfg, rng);
  const auto g = build_insertion_graph(make_embedded(2, rng, 3));
  std::vector<std::vector<std::size_t>> nbrs;
  for (std::size_t i = 0; i < 9; ++i) nbrs.push_back(neighborhood(g, i));
  Matrix h = g.features;
  for (const auto& layer : params.ggn.layers) h = oracle_layer(h, layer, nbrs);
  EXPECT_LE(max_abs_diff(ggn_forward(g, params.ggn, nullptr, false), h), 1e-10);
}

TEST(GgnForward, InferenceIsDeterministic) {
  Rng rng(8);
  ModelConfig cfg;
  cfg.embedding_dim = 5;
  const auto params = init_model(cfg, rng);
  const auto g = build_insertion_graph(make_embedded(5, rng, 0));
  EXPECT_EQ(ggn_forward(g, params.ggn, nullptr, false), ggn_forward(g, params.ggn, nullptr, false));
}

TEST(SlotReadout, IdenticalRowsIdenticalProbs) {
  Rng rng(9);
  const auto g = build_insertion_graph(make_embedded(2, rng, 0));
  const auto mlp = init_shared_mlp(4, 4, rng);
  Matrix H = random_matrix(9, 4, rng);
  for (std::size_t s = 6; s < 9; ++s)
    for (std::size_t j = 0; j < 4; ++j) H(s, j) = H(5, j);
  const auto p = slot_readout(H, mlp, g);
  for (double x : p) EXPECT_EQ(x, p[0]);
}

TEST(SlotReadout, ZeroWeightsGiveHalf) {
  Rng rng(10);
  const auto g = build_insertion_graph(make_embedded(2, rng, 0));
  const SharedMlp mlp{Matrix(4, 4), Matrix(1, 4), Matrix(4, 1), Matrix(1, 1)};
  for (double x : slot_readout(random_matrix(9, 4, rng), mlp, g)) EXPECT_EQ(x, 0.5);
}

TEST(SlotReadout, ScalarOracle) {
  Rng rng(11);
  const auto g = build_insertion_graph(make_embedded(2, rng, 0));
  SharedMlp mlp = init_shared_mlp(4, 4, rng);
  mlp.b1 = random_matrix(1, 4, rng);
  mlp.b2 = random_matrix(1, 1, rng);
  const Matrix H = random_matrix(9, 4, rng);
  const auto p = slot_readout(H, mlp, g);
  for (std::size_t s = 0; s < 4; ++s) {
    double logit = mlp.b2(0, 0);
    for (std::size_t k = 0; k < 4; ++k) {
      double a = mlp.b1(0, k);
      for (std::size_t m = 0; m < 4; ++m) a += H(5 + s, m) * mlp.w1(m, k);
      logit += std::tanh(a) * mlp.w2(k, 0);
    }
    EXPECT_NEAR(p[s], 1.0 / (1.0 + std::exp(-logit)), 1e-12);
    EXPECT_GT(p[s], 0.0);
    EXPECT_LT(p[s], 1.0);
  }
}

TEST(GgnLoss, Examples) {
  for (int label = 0; label < 4; ++label) {
    EXPECT_LE(ggn_loss(one_hot(label), label), 1e-6);
    EXPECT_NEAR(ggn_loss({0.5, 0.5, 0.5, 0.5}, label), std::numbers::ln2, 1e-15);
  }
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::array<double, 4> p{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const int label = static_cast<int>(rng.below(4));
    const auto y = one_hot(label);
    EXPECT_EQ(ggn_loss(p, label), bce_loss(p, y));
  }
  EXPECT_THROW(ggn_loss({0.5, 0.5, 0.5, 0.5}, 4), DomainError);
}

TEST(Gradients, NoDeadParameters) {
  Rng rng(13);
  ModelConfig cfg;
  cfg.embedding_dim = 8;
  cfg.dropout = 0.0;
  cfg.attn_dropout = 0.0;
  auto params = init_model(cfg, rng);
  const auto p = make_embedded(8, rng, 2);
  const auto g = model_gradients(params, p, cfg.loss_weights, nullptr, false);
  const auto names = parameter_names(params);
  ASSERT_EQ(g.grads.size(), names.size());
  for (std::size_t k = 0; k < g.grads.size(); ++k) {
    double mx = 0.0;
    for (double x : g.grads[k].data()) mx = std::max(mx, std::abs(x));
    EXPECT_GT(mx, 0.0) << names[k];
  }
}

}  // namespace
}  // namespace sentinsert
