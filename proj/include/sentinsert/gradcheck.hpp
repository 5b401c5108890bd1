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
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/matrix.hpp"
#include "sentinsert/rng.hpp"

namespace sentinsert {

struct GradCheckProbe {
  std::size_t tensor = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckProbe> probes;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Central-difference check of `analytic` (one gradient per tensor in
/// `params`) at `probe_count` coordinates drawn uniformly over all entries.
/// `loss_fn` must read the current contents of `params`; each probed entry is
/// restored after evaluation.
inline GradCheckReport grad_check(const std::function<double()>& loss_fn,
                                  std::span<Matrix* const> params,
                                  std::span<const Matrix> analytic, std::size_t probe_count,
                                  double eps, Rng& rng) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw DomainError("grad_check eps must lie in [1e-6, 1e-3]");
  if (params.size() != analytic.size()) throw ShapeError("grad_check: tensor count mismatch");
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(*params[k], analytic[k], "grad_check");
    offsets.push_back(total);
    total += params[k]->size();
  }
  GradCheckReport report;
  if (total == 0) return report;

  for (std::size_t p = 0; p < probe_count; ++p) {
    const std::size_t flat = static_cast<std::size_t>(rng.below(total));
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    const std::size_t k = static_cast<std::size_t>(it - offsets.begin()) - 1;
    const std::size_t idx = flat - offsets[k];
    double& w = (*params[k])[idx];
    const double saved = w;
    w = saved + eps;
    const double up = loss_fn();
    w = saved - eps;
    const double down = loss_fn();
    w = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("grad_check: non-finite loss");
    const double numeric = (up - down) / (2.0 * eps);
    GradCheckProbe probe{k, idx, analytic[k][idx], numeric, 0.0};
    probe.rel_error = relative_error(probe.analytic, numeric);
    report.max_rel_error = std::max(report.max_rel_error, probe.rel_error);
    report.probes.push_back(probe);
  }
  return report;
}

}  // namespace sentinsert
