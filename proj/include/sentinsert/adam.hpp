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

#include <cmath>
#include <cstdint>

#include "sentinsert/errors.hpp"
#include "sentinsert/matrix.hpp"

namespace sentinsert {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Moments for one parameter tensor.
struct AdamState {
  Matrix m;
  Matrix v;
  std::uint64_t t = 0;
  AdamOptions options;

  AdamState() = default;
  AdamState(const Matrix& like, AdamOptions opts)
      : m(like.rows(), like.cols()), v(like.rows(), like.cols()), options(opts) {}
};

/// Adam with bias correction. Weight decay is the L2 form: folded into the
/// gradient before the moment updates.
inline void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  require_same_shape(param, grad, "adam_step");
  if (state.m.empty() && state.v.empty() && !param.empty()) {
    state.m = Matrix(param.rows(), param.cols());
    state.v = Matrix(param.rows(), param.cols());
  }
  require_same_shape(param, state.m, "adam_step moments");
  require_same_shape(param, state.v, "adam_step moments");

  const AdamOptions& o = state.options;
  ++state.t;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + o.weight_decay * param[i];
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
  }
}

}  // namespace sentinsert
