#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "projbnn/common.hpp"

namespace projbnn::ad {

struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const char* op)
      : std::runtime_error(cat("non-finite value produced by '", op, "'")), op_name(op) {}
  const char* op_name;
};

inline void check_finite(double v, const char* op) {
  if (!std::isfinite(v)) throw NonFiniteError(op);
}

// Reverse-mode tape. One node per recorded operation; an edge carries the
// local partial derivative with respect to one parent. Parents always precede
// children, so a single reverse sweep propagates adjoints.
class Tape {
 public:
  std::int32_t new_leaf() {
    nodes_.push_back({edge_count(), edge_count()});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::int32_t new_unary(std::int32_t p, double w) {
    parent_.push_back(p);
    weight_.push_back(w);
    nodes_.push_back({edge_count() - 1, edge_count()});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::int32_t new_binary(std::int32_t p0, double w0, std::int32_t p1, double w1) {
    parent_.push_back(p0);
    parent_.push_back(p1);
    weight_.push_back(w0);
    weight_.push_back(w1);
    nodes_.push_back({edge_count() - 2, edge_count()});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  // n-ary nodes (fused inner products and reductions): push edges, then commit
  void push_edge(std::int32_t p, double w) {
    parent_.push_back(p);
    weight_.push_back(w);
  }

  std::int32_t commit(std::uint32_t n_edges) {
    nodes_.push_back({edge_count() - n_edges, edge_count()});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  // Seeds d(root)/d(root) = 1 and accumulates adjoints down to the leaves.
  void backward(std::int32_t root, std::vector<double>& adjoint) const {
    adjoint.assign(nodes_.size(), 0.0);
    adjoint[static_cast<std::size_t>(root)] = 1.0;
    for (std::int32_t i = root; i >= 0; --i) {
      const double g = adjoint[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      for (std::uint32_t e = n.edge_begin; e < n.edge_end; ++e)
        adjoint[static_cast<std::size_t>(parent_[e])] += weight_[e] * g;
    }
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    parent_.clear();
    weight_.clear();
  }

 private:
  struct Node {
    std::uint32_t edge_begin, edge_end;
  };

  std::uint32_t edge_count() const { return static_cast<std::uint32_t>(parent_.size()); }

  std::vector<Node> nodes_;
  std::vector<std::int32_t> parent_;
  std::vector<double> weight_;
};

// Differentiable scalar. Default-constructed or double-constructed Vars are
// constants and live off-tape (id -1).
struct Var {
  double v = 0.0;
  Tape* tape = nullptr;
  std::int32_t id = -1;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT: implicit lift of constants
  Var(double value, Tape* t, std::int32_t i) : v(value), tape(t), id(i) {}

  bool tracked() const { return tape != nullptr; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);
};

namespace detail {

inline Var unary(double value, const char* op, const Var& a, double da) {
  check_finite(value, op);
  if (!a.tracked()) return Var(value);
  return Var(value, a.tape, a.tape->new_unary(a.id, da));
}

inline Var binary(double value, const char* op, const Var& a, double da, const Var& b, double db) {
  check_finite(value, op);
  if (a.tracked() && b.tracked())
    return Var(value, a.tape, a.tape->new_binary(a.id, da, b.id, db));
  if (a.tracked()) return Var(value, a.tape, a.tape->new_unary(a.id, da));
  if (b.tracked()) return Var(value, b.tape, b.tape->new_unary(b.id, db));
  return Var(value);
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a.v + b.v, "add", a, 1.0, b, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a.v - b.v, "sub", a, 1.0, b, -1.0); }
inline Var operator*(const Var& a, const Var& b) { return detail::binary(a.v * b.v, "mul", a, b.v, b, a.v); }
inline Var operator/(const Var& a, const Var& b) {
  return detail::binary(a.v / b.v, "div", a, 1.0 / b.v, b, -a.v / (b.v * b.v));
}
inline Var operator-(const Var& a) { return detail::unary(-a.v, "neg", a, -1.0); }
inline Var operator+(const Var& a) { return a; }

inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline bool operator<(const Var& a, const Var& b) { return a.v < b.v; }
inline bool operator>(const Var& a, const Var& b) { return a.v > b.v; }
inline bool operator<=(const Var& a, const Var& b) { return a.v <= b.v; }
inline bool operator>=(const Var& a, const Var& b) { return a.v >= b.v; }
inline bool operator==(const Var& a, const Var& b) { return a.v == b.v; }
inline bool operator!=(const Var& a, const Var& b) { return a.v != b.v; }

inline Var exp(const Var& a) {
  const double e = std::exp(a.v);
  return detail::unary(e, "exp", a, e);
}
inline Var log(const Var& a) { return detail::unary(std::log(a.v), "log", a, 1.0 / a.v); }
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.v);
  return detail::unary(s, "sqrt", a, 0.5 / s);
}
inline Var tanh(const Var& a) {
  const double t = std::tanh(a.v);
  return detail::unary(t, "tanh", a, 1.0 - t * t);
}

}  // namespace projbnn::ad

// The specialization must precede any Matrix<Var> instantiation.
namespace Eigen {

template <>
struct NumTraits<projbnn::ad::Var> {
  using Self = projbnn::ad::Var;
  using Real = Self;
  using NonInteger = Self;
  using Nested = Self;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
  static inline Self epsilon() { return Self(std::numeric_limits<double>::epsilon()); }
  static inline Self dummy_precision() { return Self(1e-12); }
  static inline Self highest() { return Self(std::numeric_limits<double>::max()); }
  static inline Self lowest() { return Self(-std::numeric_limits<double>::max()); }
  static inline int digits10() { return std::numeric_limits<double>::digits10; }
  static inline int max_digits10() { return std::numeric_limits<double>::max_digits10; }
};

}  // namespace Eigen

namespace projbnn::ad {

// Evaluates a scalar loss on a fresh tape and returns value + d(loss)/d(at).
struct GradientRequest {
  std::function<Var(const VectorX<Var>&)> loss;
  VectorXd at;
};

struct GradientResult {
  double value = 0.0;
  VectorXd grad;
};

GradientResult gradient(const GradientRequest& req);

// Reusable tape scratch for optimization loops; avoids reallocating per step.
class GradientWorkspace {
 public:
  template <class F>
  double value_and_grad(F&& loss, const VectorXd& at, VectorXd& grad) {
    tape_.clear();
    const Index n = at.size();
    VectorX<Var> x(n);
    for (Index i = 0; i < n; ++i) x[i] = Var(at[i], &tape_, tape_.new_leaf());
    const Var out = loss(x);
    check_finite(out.v, "loss");
    grad.setZero(n);
    if (out.tracked()) {
      tape_.backward(out.id, adjoint_);
      for (Index i = 0; i < n; ++i) grad[i] = adjoint_[static_cast<std::size_t>(i)];
    }
    return out.v;
  }

 private:
  Tape tape_;
  std::vector<double> adjoint_;
};

}  // namespace projbnn::ad

namespace projbnn {

// Inner product usable from scalar-generic code. The Var path records one
// fused node so matvecs stay cheap on the tape.
template <class DA, class DB>
typename DA::Scalar dot(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using S = typename DA::Scalar;
  require(a.size() == b.size(), "dot: size mismatch ", a.size(), " vs ", b.size());
  if constexpr (std::is_same_v<S, ad::Var>) {
    double v = 0.0;
    ad::Tape* t = nullptr;
    for (Index i = 0; i < a.size(); ++i) {
      const ad::Var& ai = a.coeff(i);
      const ad::Var& bi = b.coeff(i);
      v += ai.v * bi.v;
      if (!t) t = ai.tracked() ? ai.tape : (bi.tracked() ? bi.tape : nullptr);
    }
    ad::check_finite(v, "dot");
    if (!t) return ad::Var(v);
    std::uint32_t n_edges = 0;
    for (Index i = 0; i < a.size(); ++i)
      if (a.coeff(i).tracked()) {
        t->push_edge(a.coeff(i).id, b.coeff(i).v);
        ++n_edges;
      }
    for (Index i = 0; i < b.size(); ++i)
      if (b.coeff(i).tracked()) {
        t->push_edge(b.coeff(i).id, a.coeff(i).v);
        ++n_edges;
      }
    return ad::Var(v, t, t->commit(n_edges));
  } else {
    return a.derived().dot(b.derived());
  }
}

// Fused || a - b ||^2 with derivative 2(a_i - b_i) toward a, negated toward b.
template <class DA, class DB>
typename DA::Scalar squared_diff_norm(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using S = typename DA::Scalar;
  require(a.size() == b.size(), "squared_diff_norm: size mismatch ", a.size(), " vs ", b.size());
  if constexpr (std::is_same_v<S, ad::Var>) {
    double v = 0.0;
    ad::Tape* t = nullptr;
    for (Index i = 0; i < a.size(); ++i) {
      const double d = a.coeff(i).v - b.coeff(i).v;
      v += d * d;
      if (!t) t = a.coeff(i).tracked() ? a.coeff(i).tape : (b.coeff(i).tracked() ? b.coeff(i).tape : nullptr);
    }
    ad::check_finite(v, "squared_diff_norm");
    if (!t) return ad::Var(v);
    std::uint32_t n_edges = 0;
    for (Index i = 0; i < a.size(); ++i) {
      const double d2 = 2.0 * (a.coeff(i).v - b.coeff(i).v);
      if (a.coeff(i).tracked()) {
        t->push_edge(a.coeff(i).id, d2);
        ++n_edges;
      }
      if (b.coeff(i).tracked()) {
        t->push_edge(b.coeff(i).id, -d2);
        ++n_edges;
      }
    }
    return ad::Var(v, t, t->commit(n_edges));
  } else {
    return (a.derived() - b.derived()).squaredNorm();
  }
}

template <class D>
typename D::Scalar sum(const Eigen::MatrixBase<D>& a) {
  using S = typename D::Scalar;
  if constexpr (std::is_same_v<S, ad::Var>) {
    double v = 0.0;
    ad::Tape* t = nullptr;
    for (Index i = 0; i < a.size(); ++i) {
      v += a.coeff(i).v;
      if (!t && a.coeff(i).tracked()) t = a.coeff(i).tape;
    }
    ad::check_finite(v, "sum");
    if (!t) return ad::Var(v);
    std::uint32_t n_edges = 0;
    for (Index i = 0; i < a.size(); ++i)
      if (a.coeff(i).tracked()) {
        t->push_edge(a.coeff(i).id, 1.0);
        ++n_edges;
      }
    return ad::Var(v, t, t->commit(n_edges));
  } else {
    return a.sum();
  }
}

// Lift a double vector into another scalar type (Vars come out as constants).
template <class S>
VectorX<S> lift(const Eigen::Ref<const VectorXd>& v) {
  VectorX<S> out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = S(v[i]);
  return out;
}

template <>
inline VectorX<double> lift<double>(const Eigen::Ref<const VectorXd>& v) {
  return v;
}

inline double value_of(double x) { return x; }
inline double value_of(const ad::Var& x) { return x.v; }

}  // namespace projbnn
