// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over dense matrices.
//
// Every value is a 2-D Eigen matrix. Ops record a closure that pushes the
// output adjoint back to their inputs; Tape::backward replays the closures in
// reverse creation order. Nodes that do not depend on a trainable leaf record
// nothing, so a tape without leaves is a plain forward evaluator.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "cfgd/error.hpp"

namespace cfgd::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

/// Receives the output adjoint and the output value.
using Backward = std::function<void(const Matrix& grad, const Matrix& out)>;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

class Tape {
 public:
  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
  Var leaf(Matrix value) { return push(std::move(value), true, nullptr); }

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

  /// Adjoint of v after backward(); zero if nothing flowed into it.
  Matrix grad(Var v) const {
    const auto& node = nodes_[static_cast<std::size_t>(v.id)];
    if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and back-propagates.
  void backward(Var root) {
    const Matrix& r = value(root);
    if (r.rows() != 1 || r.cols() != 1) throw Error(ErrorKind::ShapeMismatch, "backward needs a scalar root");
    accumulate(root, Matrix::Ones(1, 1));
    for (int id = root.id; id >= 0; --id) {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      if (node.backward && node.grad.size() != 0) node.backward(node.grad, node.value);
    }
  }

  /// Adds g into the adjoint of v (no-op for constants).
  void accumulate(Var v, const Matrix& g) {
    auto& node = nodes_[static_cast<std::size_t>(v.id)];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  template <typename... Inputs>
  bool any_requires_grad(Inputs... inputs) const {
    return (requires_grad(inputs) || ...);
  }

  Var push(Matrix value, bool requires_grad, Backward backward) {
    nodes_.push_back({std::move(value), Matrix(), requires_grad, std::move(backward)});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

namespace detail {
inline void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                              "x" + std::to_string(b.cols()));
  }
}

// Creates the output node and, when any input is trainable, registers the
// backward closure produced by make_backward().
template <typename MakeBackward, typename... Inputs>
Var record(Tape& tape, Matrix value, MakeBackward&& make_backward, Inputs... inputs) {
  if (!tape.any_requires_grad(inputs...)) return tape.push(std::move(value), false, nullptr);
  return tape.push(std::move(value), true, make_backward());
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "matmul inner dimensions differ");
  Tape& t = *a.tape;
  return detail::record(t, a.value() * b.value(), [&t, a, b] {
    return [&t, a, b](const Matrix& g, const Matrix&) {
      if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
      if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
    };
  }, a, b);
}

inline Var add(Var a, Var b) {
  detail::check_same_shape(a, b, "add");
  Tape& t = *a.tape;
  return detail::record(t, a.value() + b.value(), [&t, a, b] {
    return [&t, a, b](const Matrix& g, const Matrix&) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    };
  }, a, b);
}

inline Var sub(Var a, Var b) {
  detail::check_same_shape(a, b, "sub");
  Tape& t = *a.tape;
  return detail::record(t, a.value() - b.value(), [&t, a, b] {
    return [&t, a, b](const Matrix& g, const Matrix&) {
      t.accumulate(a, g);
      if (t.requires_grad(b)) t.accumulate(b, -g);
    };
  }, a, b);
}

/// a + row, with the 1 x c row broadcast over a's rows.
inline Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error(ErrorKind::ShapeMismatch, "add_row expects a 1 x cols row");
  Tape& t = *a.tape;
  Matrix out = a.value().rowwise() + row.value().row(0);
  return detail::record(t, std::move(out), [&t, a, row] {
    return [&t, a, row](const Matrix& g, const Matrix&) {
      t.accumulate(a, g);
      if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
    };
  }, a, row);
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::check_same_shape(a, b, "mul");
  Tape& t = *a.tape;
  return detail::record(t, a.value().cwiseProduct(b.value()), [&t, a, b] {
    return [&t, a, b](const Matrix& g, const Matrix&) {
      if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
      if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
    };
  }, a, b);
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  return detail::record(t, a.value() * c, [&t, a, c] {
    return [&t, a, c](const Matrix& g, const Matrix&) { t.accumulate(a, g * c); };
  }, a);
}

inline Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  Matrix out = a.value().array() + c;
  return detail::record(t, std::move(out), [&t, a] {
    return [&t, a](const Matrix& g, const Matrix&) { t.accumulate(a, g); };
  }, a);
}

inline Var relu(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().cwiseMax(0.0);
  return detail::record(t, std::move(out), [&t, a] {
    return [&t, a](const Matrix& g, const Matrix&) {
      t.accumulate(a, (a.value().array() > 0.0).cast<double>().matrix().cwiseProduct(g));
    };
  }, a);
}

/// Stacks `reps` copies of a: row k*r + i is row i of a.
inline Var tile_rows(Var a, Index reps) {
  Tape& t = *a.tape;
  const Index r = a.rows();
  Matrix out(r * reps, a.cols());
  for (Index k = 0; k < reps; ++k) out.middleRows(k * r, r) = a.value();
  return detail::record(t, std::move(out), [&t, a, r, reps] {
    return [&t, a, r, reps](const Matrix& g, const Matrix&) {
      Matrix acc = g.middleRows(0, r);
      for (Index k = 1; k < reps; ++k) acc += g.middleRows(k * r, r);
      t.accumulate(a, acc);
    };
  }, a);
}

/// Repeats each row `reps` times: row i*reps + k is row i of a.
inline Var repeat_rows(Var a, Index reps) {
  Tape& t = *a.tape;
  const Index r = a.rows();
  Matrix out(r * reps, a.cols());
  for (Index i = 0; i < r; ++i) out.middleRows(i * reps, reps).rowwise() = a.value().row(i);
  return detail::record(t, std::move(out), [&t, a, r, reps] {
    return [&t, a, r, reps](const Matrix& g, const Matrix&) {
      Matrix acc(r, g.cols());
      for (Index i = 0; i < r; ++i) acc.row(i) = g.middleRows(i * reps, reps).colwise().sum();
      t.accumulate(a, acc);
    };
  }, a);
}

/// Sums consecutive groups of `seg` rows: (m*seg) x c -> m x c.
inline Var segment_sum(Var a, Index seg) {
  if (seg <= 0 || a.rows() % seg != 0) throw Error(ErrorKind::ShapeMismatch, "segment_sum: rows not divisible");
  Tape& t = *a.tape;
  const Index m = a.rows() / seg;
  Matrix out(m, a.cols());
  for (Index i = 0; i < m; ++i) out.row(i) = a.value().middleRows(i * seg, seg).colwise().sum();
  return detail::record(t, std::move(out), [&t, a, m, seg] {
    return [&t, a, m, seg](const Matrix& g, const Matrix&) {
      Matrix acc(m * seg, g.cols());
      for (Index i = 0; i < m; ++i) acc.middleRows(i * seg, seg).rowwise() = g.row(i);
      t.accumulate(a, acc);
    };
  }, a);
}

/// Softmax over each group of `seg` consecutive rows, independently per column.
inline Var segment_softmax(Var a, Index seg) {
  if (seg <= 0 || a.rows() % seg != 0) throw Error(ErrorKind::ShapeMismatch, "segment_softmax: rows not divisible");
  Tape& t = *a.tape;
  const Index m = a.rows() / seg;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index i = 0; i < m; ++i) {
      const auto col = x.col(c).segment(i * seg, seg);
      auto o = out.col(c).segment(i * seg, seg);
      o = (col.array() - col.maxCoeff()).exp().matrix();
      o /= o.sum();
    }
  }
  return detail::record(t, std::move(out), [&t, a, m, seg] {
    return [&t, a, m, seg](const Matrix& g, const Matrix& y) {
      Matrix gy = g.cwiseProduct(y);
      Matrix dx(y.rows(), y.cols());
      for (Index c = 0; c < y.cols(); ++c) {
        for (Index i = 0; i < m; ++i) {
          const double dot = gy.col(c).segment(i * seg, seg).sum();
          dx.col(c).segment(i * seg, seg) =
              y.col(c).segment(i * seg, seg).cwiseProduct((g.col(c).segment(i * seg, seg).array() - dot).matrix());
        }
      }
      t.accumulate(a, dx);
    };
  }, a);
}

/// Horizontal concatenation.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_cols of nothing");
  Tape& t = *parts.front().tape;
  const Index r = parts.front().rows();
  Index total = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw Error(ErrorKind::ShapeMismatch, "concat_cols: row counts differ");
    total += p.cols();
  }
  Matrix out(r, total);
  Index off = 0;
  bool any = false;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    any = any || t.requires_grad(p);
  }
  if (!any) return t.push(std::move(out), false, nullptr);
  return t.push(std::move(out), true, [&t, parts](const Matrix& g, const Matrix&) {
    Index o = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

/// Row-wise layer normalization with learned gain and bias (1 x c each).
inline Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  const Index c = x.cols();
  Matrix xhat(x.rows(), c);
  Eigen::VectorXd inv_std(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mu) * inv_std[i];
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return detail::record(t, std::move(out), [&t, a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
    return [&t, a, gain, bias, xhat, inv_std](const Matrix& g, const Matrix&) {
      if (t.requires_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
      if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
      if (t.requires_grad(a)) {
        const Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
        Matrix dx(dxhat.rows(), dxhat.cols());
        for (Index i = 0; i < dxhat.rows(); ++i) {
          const double m1 = dxhat.row(i).mean();
          const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
          dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std[i];
        }
        t.accumulate(a, dx);
      }
    };
  }, a, gain, bias);
}

/// Column means: r x c -> 1 x c.
inline Var mean_rows(Var a) {
  Tape& t = *a.tape;
  const Index r = a.rows();
  Matrix out = a.value().colwise().mean();
  return detail::record(t, std::move(out), [&t, a, r] {
    return [&t, a, r](const Matrix& g, const Matrix&) {
      t.accumulate(a, g.replicate(r, 1) / static_cast<double>(r));
    };
  }, a);
}

namespace detail {
template <bool Max>
Var extreme_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  Matrix out(1, x.cols());
  std::vector<Index> arg(static_cast<std::size_t>(x.cols()));
  for (Index c = 0; c < x.cols(); ++c) {
    Index best = 0;
    if constexpr (Max) {
      out(0, c) = x.col(c).maxCoeff(&best);
    } else {
      out(0, c) = x.col(c).minCoeff(&best);
    }
    arg[static_cast<std::size_t>(c)] = best;
  }
  const Index r = x.rows();
  return record(t, std::move(out), [&t, a, r, arg = std::move(arg)] {
    return [&t, a, r, arg](const Matrix& g, const Matrix&) {
      Matrix dx = Matrix::Zero(r, g.cols());
      for (Index c = 0; c < g.cols(); ++c) dx(arg[static_cast<std::size_t>(c)], c) = g(0, c);
      t.accumulate(a, dx);
    };
  }, a);
}
}  // namespace detail

/// Column maxima: r x c -> 1 x c.
inline Var max_rows(Var a) { return detail::extreme_rows<true>(a); }
/// Column minima: r x c -> 1 x c.
inline Var min_rows(Var a) { return detail::extreme_rows<false>(a); }

/// Column standard deviations sqrt(var + eps): r x c -> 1 x c.
inline Var std_rows(Var a, double eps = 1e-6) {
  Tape& t = *a.tape;
  const Matrix& x = a.value();
  const Index r = x.rows();
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Matrix centered = x.rowwise() - mu;
  Matrix out = ((centered.array().square().colwise().sum() / static_cast<double>(r)) + eps).sqrt().matrix();
  return detail::record(t, std::move(out), [&t, a, r, centered = std::move(centered)] {
    return [&t, a, r, centered](const Matrix& g, const Matrix& s) {
      const Eigen::RowVectorXd coef = g.row(0).array() / (s.row(0).array() * static_cast<double>(r));
      t.accumulate(a, centered.array().rowwise() * coef.array());
    };
  }, a);
}

/// Swaps rows i*n + j and j*n + i of an (n*n) x c matrix.
inline Var pair_transpose(Var a, Index n) {
  if (a.rows() != n * n) throw Error(ErrorKind::ShapeMismatch, "pair_transpose expects n*n rows");
  Tape& t = *a.tape;
  auto transpose = [n](const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) out.row(i * n + j) = m.row(j * n + i);
    }
    return out;
  };
  return detail::record(t, transpose(a.value()), [&t, a, transpose] {
    return [&t, a, transpose](const Matrix& g, const Matrix&) { t.accumulate(a, transpose(g)); };
  }, a);
}

/// Row-wise softmax of a plain matrix (no tape).
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

inline constexpr double kLogClamp = 1e-12;

/// sum_r weight[r] * -log(max(softmax(logits_r)[target[r]], 1e-12)) as a 1x1 value.
/// Rows with zero weight are skipped.
inline Var weighted_cross_entropy(Var logits, std::vector<int> target, std::vector<double> weight) {
  if (static_cast<Index>(target.size()) != logits.rows() || weight.size() != target.size()) {
    throw Error(ErrorKind::ShapeMismatch, "cross entropy targets do not match logits");
  }
  Tape& t = *logits.tape;
  Matrix probs = softmax_rows(logits.value());
  double loss = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (weight[k] == 0.0) continue;
    loss -= weight[k] * std::log(std::max(probs(i, target[k]), kLogClamp));
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return detail::record(t, std::move(out), [&t, logits, probs = std::move(probs), target = std::move(target), weight = std::move(weight)] {
    return [&t, logits, probs, target, weight](const Matrix& g, const Matrix&) {
      Matrix dx = Matrix::Zero(probs.rows(), probs.cols());
      for (Index i = 0; i < probs.rows(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (weight[k] == 0.0 || probs(i, target[k]) <= kLogClamp) continue;
        dx.row(i) = probs.row(i) * weight[k];
        dx(i, target[k]) -= weight[k];
      }
      t.accumulate(logits, dx * g(0, 0));
    };
  }, logits);
}

/// x W + b for a row-major batch x.
inline Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

}  // namespace cfgd::ad
