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
#include <vector>

#include "sentinsert/ggn.hpp"

// Loop-level reference implementations, independent of the tape.
namespace sentinsert::testing {

inline double leaky(double x, double slope) { return x >= 0 ? x : slope * x; }

// Straight-line reimplementation of one attention layer.
inline Matrix oracle_layer(const Matrix& H, const GatLayerParams& p, const std::vector<std::vector<std::size_t>>& nbrs) {
  const auto& c = p.config;
  const std::size_t n = H.rows(), w = c.head_width;
  Matrix out(n, c.out_width());
  for (std::size_t h = 0; h < c.heads; ++h) {
    std::vector<std::vector<double>> Wh(n, std::vector<double>(w, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < w; ++k)
        for (std::size_t m = 0; m < c.in_width; ++m) Wh[i][k] += H(i, m) * p.W[h](m, k);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> e;
      for (std::size_t j : nbrs[i]) {
        double s = 0.0;
        for (std::size_t k = 0; k < w; ++k) s += p.attn[h](k, 0) * Wh[i][k] + p.attn[h](w + k, 0) * Wh[j][k];
        e.push_back(leaky(s, c.leaky_slope));
      }
      double mx = e[0];
      for (double x : e) mx = std::max(mx, x);
      double z = 0.0;
      for (double& x : e) z += (x = std::exp(x - mx));
      for (std::size_t k = 0; k < w; ++k) {
        double acc = 0.0;
        for (std::size_t q = 0; q < nbrs[i].size(); ++q) acc += e[q] / z * Wh[nbrs[i][q]][k];
        if (c.merge == HeadMerge::concat) out(i, h * w + k) = acc;
        else out(i, k) += acc / static_cast<double>(c.heads);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < out.cols(); ++k) {
      double r = 0.0;
      if (p.residual_proj) {
        for (std::size_t m = 0; m < c.in_width; ++m) r += H(i, m) * (*p.residual_proj)(m, k);
      } else {
        r = H(i, k);
      }
      out(i, k) = apply(c.activation, out(i, k) + r);
    }
  return out;
}

inline std::array<double, kSlotCount> oracle_readout(const Matrix& H, const SharedMlp& mlp, std::size_t first_slot_row) {
  std::array<double, kSlotCount> out{};
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    double logit = mlp.b2(0, 0);
    for (std::size_t k = 0; k < mlp.w1.cols(); ++k) {
      double a = mlp.b1(0, k);
      for (std::size_t m = 0; m < mlp.w1.rows(); ++m) a += H(first_slot_row + s, m) * mlp.w1(m, k);
      logit += std::tanh(a) * mlp.w2(k, 0);
    }
    out[s] = 1.0 / (1.0 + std::exp(-logit));
  }
  return out;
}

}  // namespace sentinsert::testing
