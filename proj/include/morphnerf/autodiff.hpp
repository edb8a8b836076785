#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape owns a growing list of nodes; each op appends a node holding its
// value and a backward closure that scatters the node's gradient to its
// parents. backward() sweeps the tape in reverse creation order, which is a
// valid topological order because ops can only reference earlier nodes.
// Gradient accumulation is ordered and single-threaded, so results are
// reproducible; the heavy lifting (GEMM) is delegated to Eigen.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "morphnerf/errors.hpp"

namespace mnrf::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class Tape;

/// Lightweight handle to a node on a tape. Copyable, trivially cheap.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& val() const;
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  double scalar() const;
};

class Tape {
 public:
  struct Node {
    Mat val;
    Mat grad;  // empty until touched by backward
    bool requires_grad = false;
    std::function<void()> back;  // empty for leaves/constants
  };

  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient-tracked input (parameters, latent codes).
  Var leaf(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), record_, {}});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Input that never receives a gradient.
  Var constant(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), false, {}});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var make(Mat value, bool requires_grad, std::function<void()> back) {
    const bool rg = requires_grad && record_;
    nodes_.push_back(Node{std::move(value), Mat(), rg, rg ? std::move(back) : std::function<void()>()});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  /// Adds g into the gradient buffer of node `id` (no-op for constants).
  void accumulate(int id, const Mat& g) {
    Node& n = node(id);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    n.grad += g;
  }

  /// Reverse sweep from a scalar root. Gradients of all leaves reachable from
  /// the root are accumulated; earlier backward() calls on the same tape keep
  /// their contributions (call clear() between independent evaluations).
  void backward(Var root) {
    if (root.tape != this) throw DomainError("backward: root lives on another tape");
    const Node& r = node(root.id);
    if (r.val.size() != 1) throw DomainError("backward: root must be a scalar");
    accumulate(root.id, Mat::Ones(1, 1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.requires_grad && n.grad.size() != 0 && n.back) n.back();
    }
  }

  /// Gradient of a node; zero matrix if it never received one.
  Mat grad(Var v) const {
    const Node& n = node(v.id);
    if (n.grad.size() == 0) return Mat::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
  bool record_;
};

inline const Mat& Var::val() const { return tape->node(id).val; }
inline Eigen::Index Var::rows() const { return val().rows(); }
inline Eigen::Index Var::cols() const { return val().cols(); }
inline double Var::scalar() const {
  if (val().size() != 1) throw DomainError("scalar(): node is not 1x1");
  return val()(0, 0);
}

namespace detail {
inline void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw DomainError("op: operands live on different tapes");
}
inline void check_same_shape(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DomainError("op: shape mismatch");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b);
  Tape& t = *a.tape;
  return t.make(a.val() + b.val(), t.node(a.id).requires_grad || t.node(b.id).requires_grad,
                [&t, ai = a.id, bi = b.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  t.accumulate(ai, g);
                  t.accumulate(bi, g);
                });
}

inline Var sub(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b);
  Tape& t = *a.tape;
  return t.make(a.val() - b.val(), t.node(a.id).requires_grad || t.node(b.id).requires_grad,
                [&t, ai = a.id, bi = b.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  t.accumulate(ai, g);
                  t.accumulate(bi, -g);
                });
}

inline Var mul(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b);
  Tape& t = *a.tape;
  return t.make(a.val().cwiseProduct(b.val()),
                t.node(a.id).requires_grad || t.node(b.id).requires_grad,
                [&t, ai = a.id, bi = b.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  t.accumulate(ai, g.cwiseProduct(t.node(bi).val));
                  t.accumulate(bi, g.cwiseProduct(t.node(ai).val));
                });
}

inline Var div(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b);
  Tape& t = *a.tape;
  return t.make(a.val().cwiseQuotient(b.val()),
                t.node(a.id).requires_grad || t.node(b.id).requires_grad,
                [&t, ai = a.id, bi = b.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  const Mat& bv = t.node(bi).val;
                  t.accumulate(ai, g.cwiseQuotient(bv));
                  t.accumulate(bi, -g.cwiseProduct(t.node(out).val).cwiseQuotient(bv));
                });
}

// ---------------------------------------------------------------------------
// Elementwise unary ops
// ---------------------------------------------------------------------------

/// a * x + b, elementwise with scalar coefficients.
inline Var affine(Var x, double a, double b) {
  Tape& t = *x.tape;
  return t.make((a * x.val().array() + b).matrix(), t.node(x.id).requires_grad,
                [&t, xi = x.id, a, out = static_cast<int>(t.size())] {
                  t.accumulate(xi, a * t.node(out).grad);
                });
}

inline Var neg(Var x) { return affine(x, -1.0, 0.0); }

inline Var exp(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().array().exp().matrix(), t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  t.accumulate(xi, t.node(out).grad.cwiseProduct(t.node(out).val));
                });
}

inline Var abs(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().cwiseAbs(), t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  // subgradient 0 at x == 0
                  const Mat sign = t.node(xi).val.unaryExpr(
                      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
                  t.accumulate(xi, t.node(out).grad.cwiseProduct(sign));
                });
}

inline Var relu(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().cwiseMax(0.0), t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  const Mat mask = t.node(xi).val.unaryExpr(
                      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
                  t.accumulate(xi, t.node(out).grad.cwiseProduct(mask));
                });
}

inline Var leaky_relu(Var x, double slope) {
  Tape& t = *x.tape;
  return t.make(x.val().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; }),
                t.node(x.id).requires_grad,
                [&t, xi = x.id, slope, out = static_cast<int>(t.size())] {
                  const Mat mask = t.node(xi).val.unaryExpr(
                      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
                  t.accumulate(xi, t.node(out).grad.cwiseProduct(mask));
                });
}

inline Var sigmoid(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }),
                t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  const Mat& s = t.node(out).val;
                  t.accumulate(xi, t.node(out).grad.cwiseProduct(
                                       s.cwiseProduct(Mat::Ones(s.rows(), s.cols()) - s)));
                });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  detail::check_same_tape(a, b);
  if (a.cols() != b.rows()) throw DomainError("matmul: inner dimension mismatch");
  Tape& t = *a.tape;
  return t.make(a.val() * b.val(), t.node(a.id).requires_grad || t.node(b.id).requires_grad,
                [&t, ai = a.id, bi = b.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  t.accumulate(ai, g * t.node(bi).val.transpose());
                  t.accumulate(bi, t.node(ai).val.transpose() * g);
                });
}

/// Row-batched dense layer: X [n x in], W [out x in], b [out x 1] -> [n x out].
inline Var linear(Var x, Var w, Var b) {
  detail::check_same_tape(x, w);
  detail::check_same_tape(x, b);
  if (x.cols() != w.cols()) throw DomainError("linear: input width != weight fan-in");
  if (b.rows() != w.rows() || b.cols() != 1) throw DomainError("linear: bias shape mismatch");
  Tape& t = *x.tape;
  Mat y = x.val() * w.val().transpose();
  y.rowwise() += b.val().col(0).transpose();
  const bool rg = t.node(x.id).requires_grad || t.node(w.id).requires_grad ||
                  t.node(b.id).requires_grad;
  return t.make(std::move(y), rg,
                [&t, xi = x.id, wi = w.id, bi = b.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  t.accumulate(xi, g * t.node(wi).val);
                  t.accumulate(wi, g.transpose() * t.node(xi).val);
                  t.accumulate(bi, g.colwise().sum().transpose());
                });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw DomainError("concat_cols: no inputs");
  Tape& t = *xs.front().tape;
  Eigen::Index n = xs.front().rows();
  Eigen::Index total = 0;
  bool rg = false;
  for (Var v : xs) {
    detail::check_same_tape(xs.front(), v);
    if (v.rows() != n) throw DomainError("concat_cols: row count mismatch");
    total += v.cols();
    rg = rg || t.node(v.id).requires_grad;
  }
  Mat y(n, total);
  Eigen::Index off = 0;
  std::vector<std::pair<int, Eigen::Index>> parts;
  parts.reserve(xs.size());
  for (Var v : xs) {
    y.middleCols(off, v.cols()) = v.val();
    parts.emplace_back(v.id, v.cols());
    off += v.cols();
  }
  return t.make(std::move(y), rg,
                [&t, parts = std::move(parts), out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Eigen::Index off = 0;
                  for (const auto& [id, w] : parts) {
                    t.accumulate(id, g.middleCols(off, w));
                    off += w;
                  }
                });
}

inline Var concat_cols(Var a, Var b) { return concat_cols(std::vector<Var>{a, b}); }
inline Var concat_cols(Var a, Var b, Var c) { return concat_cols(std::vector<Var>{a, b, c}); }

inline Var slice_cols(Var x, Eigen::Index from, Eigen::Index len) {
  if (from < 0 || len < 0 || from + len > x.cols()) throw DomainError("slice_cols: out of range");
  Tape& t = *x.tape;
  return t.make(x.val().middleCols(from, len), t.node(x.id).requires_grad,
                [&t, xi = x.id, from, len, out = static_cast<int>(t.size())] {
                  Mat g = Mat::Zero(t.node(xi).val.rows(), t.node(xi).val.cols());
                  g.middleCols(from, len) = t.node(out).grad;
                  t.accumulate(xi, g);
                });
}

inline Var slice_rows(Var x, Eigen::Index from, Eigen::Index len) {
  if (from < 0 || len < 0 || from + len > x.rows()) throw DomainError("slice_rows: out of range");
  Tape& t = *x.tape;
  return t.make(x.val().middleRows(from, len), t.node(x.id).requires_grad,
                [&t, xi = x.id, from, len, out = static_cast<int>(t.size())] {
                  Mat g = Mat::Zero(t.node(xi).val.rows(), t.node(xi).val.cols());
                  g.middleRows(from, len) = t.node(out).grad;
                  t.accumulate(xi, g);
                });
}

/// Copy-reshape with row-major scan order on both sides.
inline Var reshape_rowmajor(Var x, Eigen::Index r, Eigen::Index c) {
  if (r * c != x.rows() * x.cols()) throw DomainError("reshape_rowmajor: size mismatch");
  Tape& t = *x.tape;
  const Mat& v = x.val();
  Mat y(r, c);
  {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index j = 0; j < v.cols(); ++j, ++k) y(k / c, k % c) = v(i, j);
  }
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  const Mat& xv = t.node(xi).val;
                  Mat gx(xv.rows(), xv.cols());
                  Eigen::Index k = 0;
                  for (Eigen::Index i = 0; i < xv.rows(); ++i)
                    for (Eigen::Index j = 0; j < xv.cols(); ++j, ++k)
                      gx(i, j) = g(k / g.cols(), k % g.cols());
                  t.accumulate(xi, gx);
                });
}

/// Repeats a row vector [1 x d] into [n x d].
inline Var broadcast_rows(Var v, Eigen::Index n) {
  if (v.rows() != 1) throw DomainError("broadcast_rows: input must be a row vector");
  Tape& t = *v.tape;
  return t.make(v.val().replicate(n, 1), t.node(v.id).requires_grad,
                [&t, vi = v.id, out = static_cast<int>(t.size())] {
                  t.accumulate(vi, t.node(out).grad.colwise().sum());
                });
}

// ---------------------------------------------------------------------------
// Gather / scatter
// ---------------------------------------------------------------------------

inline Var gather_rows(Var x, std::vector<int> rows) {
  Tape& t = *x.tape;
  Mat y(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= x.rows()) throw DomainError("gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(k)) = x.val().row(rows[k]);
  }
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, rows = std::move(rows), out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Mat gx = Mat::Zero(t.node(xi).val.rows(), t.node(xi).val.cols());
                  for (std::size_t k = 0; k < rows.size(); ++k)
                    gx.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
                  t.accumulate(xi, gx);
                });
}

/// base with rows[k] overwritten by values.row(k), in order (last write wins).
/// The gradient flows only to the surviving writer of each row.
inline Var scatter_rows(Tape& t, const Mat& base, std::vector<int> rows, Var values) {
  if (values.rows() != static_cast<Eigen::Index>(rows.size()))
    throw DomainError("scatter_rows: row count mismatch");
  if (values.cols() != base.cols()) throw DomainError("scatter_rows: column mismatch");
  Mat y = base;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= base.rows()) throw DomainError("scatter_rows: index out of range");
    y.row(rows[k]) = values.val().row(static_cast<Eigen::Index>(k));
  }
  // survivors[k]: does write k reach the output?
  std::vector<char> survivor(rows.size(), 0);
  {
    std::vector<int> last(static_cast<std::size_t>(base.rows()), -1);
    for (std::size_t k = 0; k < rows.size(); ++k) last[static_cast<std::size_t>(rows[k])] = static_cast<int>(k);
    for (std::size_t k = 0; k < rows.size(); ++k)
      survivor[k] = (last[static_cast<std::size_t>(rows[k])] == static_cast<int>(k)) ? 1 : 0;
  }
  return t.make(std::move(y), t.node(values.id).requires_grad,
                [&t, vi = values.id, rows = std::move(rows), survivor = std::move(survivor),
                 out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Mat gv = Mat::Zero(t.node(vi).val.rows(), t.node(vi).val.cols());
                  for (std::size_t k = 0; k < rows.size(); ++k)
                    if (survivor[k]) gv.row(static_cast<Eigen::Index>(k)) = g.row(rows[k]);
                  t.accumulate(vi, gv);
                });
}

// ---------------------------------------------------------------------------
// Reductions and per-row ops
// ---------------------------------------------------------------------------

inline Var sum(Var x) {
  Tape& t = *x.tape;
  Mat y(1, 1);
  y(0, 0) = x.val().sum();
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  const double g = t.node(out).grad(0, 0);
                  t.accumulate(xi, Mat::Constant(t.node(xi).val.rows(), t.node(xi).val.cols(), g));
                });
}

inline Var mean(Var x) { return affine(sum(x), 1.0 / static_cast<double>(x.val().size()), 0.0); }

inline Var row_sum(Var x) {
  Tape& t = *x.tape;
  return t.make(x.val().rowwise().sum(), t.node(x.id).requires_grad,
                [&t, xi = x.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;  // n x 1
                  t.accumulate(xi, g.replicate(1, t.node(xi).val.cols()));
                });
}

/// Scales row i of X by w(i): X [n x m], w [n x 1].
inline Var row_scale(Var x, Var w) {
  detail::check_same_tape(x, w);
  if (w.cols() != 1 || w.rows() != x.rows()) throw DomainError("row_scale: weight shape mismatch");
  Tape& t = *x.tape;
  return t.make(x.val().array().colwise() * w.val().col(0).array(),
                t.node(x.id).requires_grad || t.node(w.id).requires_grad,
                [&t, xi = x.id, wi = w.id, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  const Mat& xv = t.node(xi).val;
                  const Mat& wv = t.node(wi).val;
                  t.accumulate(xi, g.array().colwise() * wv.col(0).array());
                  t.accumulate(wi, g.cwiseProduct(xv).rowwise().sum());
                });
}

/// Sums each consecutive block of `seg` rows: [(s*seg) x m] -> [s x m].
inline Var segment_sum(Var x, Eigen::Index seg) {
  if (seg <= 0 || x.rows() % seg != 0) throw DomainError("segment_sum: bad segment length");
  Tape& t = *x.tape;
  const Eigen::Index s = x.rows() / seg;
  Mat y = Mat::Zero(s, x.cols());
  for (Eigen::Index i = 0; i < s; ++i) y.row(i) = x.val().middleRows(i * seg, seg).colwise().sum();
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, seg, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Mat gx(t.node(xi).val.rows(), t.node(xi).val.cols());
                  for (Eigen::Index i = 0; i < g.rows(); ++i)
                    gx.middleRows(i * seg, seg) = g.row(i).replicate(seg, 1);
                  t.accumulate(xi, gx);
                });
}

/// Per-segment exclusive prefix sum on a column vector [(s*seg) x 1]:
/// y[k] = sum of x over earlier entries of k's segment.
inline Var exclusive_cumsum_segments(Var x, Eigen::Index seg) {
  if (x.cols() != 1) throw DomainError("exclusive_cumsum_segments: column vector expected");
  if (seg <= 0 || x.rows() % seg != 0) throw DomainError("exclusive_cumsum_segments: bad segment");
  Tape& t = *x.tape;
  const Eigen::Index n = x.rows();
  Mat y(n, 1);
  for (Eigen::Index b = 0; b < n; b += seg) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < seg; ++j) {
      y(b + j, 0) = acc;
      acc += x.val()(b + j, 0);
    }
  }
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, seg, n, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Mat gx(n, 1);
                  for (Eigen::Index b = 0; b < n; b += seg) {
                    double acc = 0.0;
                    for (Eigen::Index j = seg - 1; j >= 0; --j) {
                      gx(b + j, 0) = acc;
                      acc += g(b + j, 0);
                    }
                  }
                  t.accumulate(xi, gx);
                });
}

// ---------------------------------------------------------------------------
// 1D valid convolutions (for separable windows)
// ---------------------------------------------------------------------------

/// Convolves along each row: X [h x w], kernel k -> [h x (w-k+1)].
inline Var conv_valid_cols(Var x, Vec kernel) {
  const Eigen::Index k = kernel.size();
  if (k < 1 || x.cols() < k) throw DomainError("conv_valid_cols: kernel wider than input");
  Tape& t = *x.tape;
  const Eigen::Index h = x.rows(), w = x.cols() - k + 1;
  Mat y = Mat::Zero(h, w);
  for (Eigen::Index u = 0; u < k; ++u) y += kernel(u) * x.val().middleCols(u, w);
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, kernel = std::move(kernel), w, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Mat gx = Mat::Zero(t.node(xi).val.rows(), t.node(xi).val.cols());
                  for (Eigen::Index u = 0; u < kernel.size(); ++u)
                    gx.middleCols(u, w) += kernel(u) * g;
                  t.accumulate(xi, gx);
                });
}

/// Convolves along each column: X [h x w], kernel k -> [(h-k+1) x w].
inline Var conv_valid_rows(Var x, Vec kernel) {
  const Eigen::Index k = kernel.size();
  if (k < 1 || x.rows() < k) throw DomainError("conv_valid_rows: kernel taller than input");
  Tape& t = *x.tape;
  const Eigen::Index h = x.rows() - k + 1, w = x.cols();
  Mat y = Mat::Zero(h, w);
  for (Eigen::Index u = 0; u < k; ++u) y += kernel(u) * x.val().middleRows(u, h);
  return t.make(std::move(y), t.node(x.id).requires_grad,
                [&t, xi = x.id, kernel = std::move(kernel), h, out = static_cast<int>(t.size())] {
                  const Mat& g = t.node(out).grad;
                  Mat gx = Mat::Zero(t.node(xi).val.rows(), t.node(xi).val.cols());
                  for (Eigen::Index u = 0; u < kernel.size(); ++u)
                    gx.middleRows(u, h) += kernel(u) * g;
                  t.accumulate(xi, gx);
                });
}

// ---------------------------------------------------------------------------
// Operator sugar
// ---------------------------------------------------------------------------

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double a, Var b) { return affine(b, a, 0.0); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace mnrf::ad
