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

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/kernels.hpp"
#include "sentinsert/matrix.hpp"

// Reverse-mode differentiation over dense matrices, restricted to the handful
// of operations the insertion model is built from.
namespace sentinsert::ad {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Var leaf(Matrix value, bool requires_grad = true) {
    return push(std::move(value), requires_grad, nullptr);
  }
  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }

  /// Records an op result. The backprop closure runs only if any input
  /// needs a gradient.
  Var record(Matrix value, std::span<const Var> inputs, Backprop backprop) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_.at(v.id).requires_grad;
    return push(std::move(value), needs, needs ? std::move(backprop) : nullptr);
  }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient of the last backward() target with respect to v; zeros if v
  /// did not influence it.
  const Matrix& grad(Var v) {
    Node& n = nodes_.at(v.id);
    ensure_grad(n);
    return n.grad;
  }

  /// Adds g into v's gradient accumulator (no-op for constants).
  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_.at(v.id);
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += g;
  }

  void backward(Var scalar) {
    const Matrix& out = value(scalar);
    if (out.rows() != 1 || out.cols() != 1) {
      throw ShapeError("backward: target must be 1x1, got " + out.shape_string());
    }
    for (Node& n : nodes_) n.grad = Matrix();
    Node& root = nodes_.at(scalar.id);
    if (!root.requires_grad) return;
    root.grad = Matrix(1, 1, 1.0);
    for (std::size_t i = scalar.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backprop && !n.grad.empty()) n.backprop(*this, i);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by op backprops: upstream gradient of node `self`.
  const Matrix& upstream(std::size_t self) const { return nodes_[self].grad; }
  const Matrix& value_at(std::size_t self) const { return nodes_[self].value; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  static void ensure_grad(Node& n) {
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  }

  Var push(Matrix value, bool requires_grad, Backprop backprop) {
    if (!value.all_finite()) throw NumericError("non-finite value recorded on tape");
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backprop)});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline Var matmul(Tape& t, Var a, Var b) {
  Matrix out = sentinsert::matmul(t.value(a), t.value(b));
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    if (tp.requires_grad(a)) tp.accumulate(a, matmul_nt(g, tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, matmul_tn(tp.value(a), g));
  });
}

inline Var add(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) + t.value(b);
  const Var in[] = {a, b};
  return t.record(std::move(out), in, [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

/// a (n x c) plus a 1 x c row broadcast over every row.
inline Var add_row(Tape& t, Var a, Var row) {
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: " + av.shape_string() + " + " + rv.shape_string());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  const Var in[] = {a, row};
  return t.record(std::move(out), in, [a, row](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    tp.accumulate(a, g);
    if (tp.requires_grad(row)) {
      Matrix gr(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      tp.accumulate(row, gr);
    }
  });
}

inline Var scale(Tape& t, Var a, double s) {
  Matrix out = s * t.value(a);
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, s](Tape& tp, std::size_t self) {
    tp.accumulate(a, s * tp.upstream(self));
  });
}

/// Elementwise product with a constant matrix (dropout masks).
inline Var mask_mul(Tape& t, Var a, Matrix mask) {
  Matrix out = hadamard(t.value(a), mask);
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, m = std::move(mask)](Tape& tp, std::size_t self) {
    tp.accumulate(a, hadamard(tp.upstream(self), m));
  });
}

inline Var activate(Tape& t, Var a, Activation act) {
  if (act.kind == Activation::Kind::identity) return a;
  Matrix out = activation(t.value(a), act);
  const Var in[] = {a};
  return t.record(std::move(out), in, [a, act](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(a);
    const Matrix& y = tp.value_at(self);
    Matrix g = tp.upstream(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= derivative(act, x[i], y[i]);
    tp.accumulate(a, g);
  });
}

/// out(i, j) = s(i) + u(j) for column vectors s (n x 1) and u (m x 1).
inline Var pairwise_sum(Tape& t, Var s, Var u) {
  const Matrix& sv = t.value(s);
  const Matrix& uv = t.value(u);
  if (sv.cols() != 1 || uv.cols() != 1) throw ShapeError("pairwise_sum: expects column vectors");
  Matrix out(sv.rows(), uv.rows());
  for (std::size_t i = 0; i < sv.rows(); ++i)
    for (std::size_t j = 0; j < uv.rows(); ++j) out(i, j) = sv(i, 0) + uv(j, 0);
  const Var in[] = {s, u};
  return t.record(std::move(out), in, [s, u](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    Matrix gs(g.rows(), 1);
    Matrix gu(g.cols(), 1);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        gs(i, 0) += g(i, j);
        gu(j, 0) += g(i, j);
      }
    tp.accumulate(s, gs);
    tp.accumulate(u, gu);
  });
}

/// Row-wise softmax restricted to entries where mask != 0. A row whose mask
/// is entirely zero yields a zero row.
inline Matrix masked_row_softmax(const Matrix& scores, const Matrix& mask) {
  require_same_shape(scores, mask, "masked_row_softmax");
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scores.cols(); ++j)
      if (mask(i, j) != 0.0) m = std::max(m, scores(i, j));
    if (!std::isfinite(m)) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      if (mask(i, j) == 0.0) continue;
      out(i, j) = std::exp(scores(i, j) - m);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < scores.cols(); ++j) out(i, j) /= total;
  }
  return out;
}

inline Var masked_softmax(Tape& t, Var scores, Matrix mask) {
  Matrix out = masked_row_softmax(t.value(scores), mask);
  const Var in[] = {scores};
  return t.record(std::move(out), in, [scores](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value_at(self);
    const Matrix& g = tp.upstream(self);
    Matrix gx(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) = y(i, j) * (g(i, j) - dot);
    }
    tp.accumulate(scores, gx);
  });
}

inline Var concat_cols(Tape& t, std::span<const Var> parts) {
  std::vector<Matrix> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(t.value(p));
  Matrix out = sentinsert::concat_cols(values);
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ins](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    std::size_t offset = 0;
    for (Var p : ins) {
      const Matrix& pv = tp.value(p);
      if (tp.requires_grad(p)) {
        Matrix gp(pv.rows(), pv.cols());
        for (std::size_t i = 0; i < pv.rows(); ++i)
          for (std::size_t j = 0; j < pv.cols(); ++j) gp(i, j) = g(i, offset + j);
        tp.accumulate(p, gp);
      }
      offset += pv.cols();
    }
  });
}

/// Rows [begin, begin + count) of x.
inline Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count) {
  const Matrix& xv = t.value(x);
  if (begin + count > xv.rows()) throw ShapeError("slice_rows: range out of bounds");
  Matrix out(count, xv.cols());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out(i, j) = xv(begin + i, j);
  const Var in[] = {x};
  return t.record(std::move(out), in, [x, begin, count](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    const Matrix& xv2 = tp.value(x);
    Matrix gx(xv2.rows(), xv2.cols());
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < xv2.cols(); ++j) gx(begin + i, j) = g(i, j);
    tp.accumulate(x, gx);
  });
}

/// Rows of the inputs stacked top to bottom; all inputs share a column count.
inline Var concat_rows(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = t.value(parts.front()).cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    if (t.value(p).cols() != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += t.value(p).rows();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& pv = t.value(p);
    for (std::size_t i = 0; i < pv.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) out(offset + i, j) = pv(i, j);
    offset += pv.rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ins](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    std::size_t off = 0;
    for (Var p : ins) {
      const Matrix& pv = tp.value(p);
      if (tp.requires_grad(p)) {
        Matrix gp(pv.rows(), pv.cols());
        for (std::size_t i = 0; i < pv.rows(); ++i)
          for (std::size_t j = 0; j < pv.cols(); ++j) gp(i, j) = g(off + i, j);
        tp.accumulate(p, gp);
      }
      off += pv.rows();
    }
  });
}

/// Elementwise mean of same-shaped inputs.
inline Var mean_of(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("mean_of: no inputs");
  Matrix out = t.value(parts.front());
  for (std::size_t k = 1; k < parts.size(); ++k) out += t.value(parts[k]);
  const double inv = 1.0 / static_cast<double>(parts.size());
  out = inv * std::move(out);
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ins, inv](Tape& tp, std::size_t self) {
    const Matrix g = inv * tp.upstream(self);
    for (Var p : ins) tp.accumulate(p, g);
  });
}

/// Non-overlapping k x k average pooling after zero-padding both dimensions
/// up to multiples of k. Each output is (sum of real entries in block) / k^2.
inline Var avg_pool(Tape& t, Var x, std::size_t k) {
  const Matrix& xv = t.value(x);
  const std::size_t out_r = (xv.rows() + k - 1) / k;
  const std::size_t out_c = (xv.cols() + k - 1) / k;
  const double inv = 1.0 / static_cast<double>(k * k);
  Matrix out(out_r, out_c);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t j = 0; j < xv.cols(); ++j) out(i / k, j / k) += xv(i, j) * inv;
  const Var in[] = {x};
  return t.record(std::move(out), in, [x, k, inv](Tape& tp, std::size_t self) {
    const Matrix& g = tp.upstream(self);
    const Matrix& xv2 = tp.value(x);
    Matrix gx(xv2.rows(), xv2.cols());
    for (std::size_t i = 0; i < gx.rows(); ++i)
      for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) = g(i / k, j / k) * inv;
    tp.accumulate(x, gx);
  });
}

/// Flattens to a 1 x n row (row-major order).
inline Var flatten_row(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  Matrix out(1, xv.size(), std::vector<double>(xv.data().begin(), xv.data().end()));
  const Var in[] = {x};
  return t.record(std::move(out), in, [x](Tape& tp, std::size_t self) {
    const Matrix& xv2 = tp.value(x);
    const Matrix& g = tp.upstream(self);
    tp.accumulate(x, Matrix(xv2.rows(), xv2.cols(),
                            std::vector<double>(g.data().begin(), g.data().end())));
  });
}

/// Mean binary cross-entropy between probabilities p and constant labels;
/// probabilities are clamped, and the clamp has zero derivative outside.
inline Var bce(Tape& t, Var p, Matrix labels) {
  const Matrix& pv = t.value(p);
  require_same_shape(pv, labels, "bce");
  Matrix out(1, 1, bce_loss(pv.data(), labels.data()));
  const Var in[] = {p};
  return t.record(std::move(out), in, [p, y = std::move(labels)](Tape& tp, std::size_t self) {
    const Matrix& pv2 = tp.value(p);
    const double g = tp.upstream(self)(0, 0);
    const double n = static_cast<double>(pv2.size());
    Matrix gp(pv2.rows(), pv2.cols());
    for (std::size_t i = 0; i < pv2.size(); ++i) {
      const double raw = pv2[i];
      if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
      gp[i] = g * (-(y[i] / raw) + (1.0 - y[i]) / (1.0 - raw)) / n;
    }
    tp.accumulate(p, gp);
  });
}

/// Σ w_k · s_k over 1 x 1 inputs.
inline Var weighted_sum(Tape& t, std::span<const Var> scalars, std::span<const double> weights) {
  if (scalars.size() != weights.size()) throw ShapeError("weighted_sum: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    const Matrix& v = t.value(scalars[k]);
    if (v.size() != 1) throw ShapeError("weighted_sum: inputs must be 1x1");
    total += weights[k] * v[0];
  }
  std::vector<Var> ins(scalars.begin(), scalars.end());
  std::vector<double> ws(weights.begin(), weights.end());
  return t.record(Matrix(1, 1, total), scalars, [ins, ws](Tape& tp, std::size_t self) {
    const double g = tp.upstream(self)(0, 0);
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (ws[k] == 0.0) continue;
      tp.accumulate(ins[k], Matrix(1, 1, ws[k] * g));
    }
  });
}

}  // namespace sentinsert::ad
