#pragma once

// Mixed-mode differentiation for physics-informed training.
//
// Input derivatives (d/dx, d/dt, d2/dx2) are pushed forward as jets. Every
// jet component is itself a variable on a reverse-mode tape, so the gradient
// of any loss built from residuals with respect to the network parameters is
// obtained with one backward sweep.
//
// Tape variables are batched: a node holds an (features x batch) array and a
// 1x1 node is an ordinary scalar. All arithmetic is elementwise with
// broadcasting over singleton dimensions, except matmul.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "fisher/error.hpp"

namespace fisher {

using Array = Eigen::ArrayXXd;

enum class Elementary { tanh, sigmoid, sin, swish, exp, negate, square };

Elementary parse_elementary(std::string_view name);
std::string_view to_string(Elementary f);

/// Derivative of order 0..3 of an elementary function, evaluated at x.
template <class T>
T elementary_derivative(Elementary f, int order, T x) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::tanh;
  if (order < 0 || order > 3) throw UsageError("elementary derivative order must be in [0, 3]");
  switch (f) {
    case Elementary::tanh: {
      const T t = tanh(x);
      const T s = T(1) - t * t;
      switch (order) {
        case 0: return t;
        case 1: return s;
        case 2: return T(-2) * t * s;
        default: return s * (T(6) * t * t - T(2));
      }
    }
    case Elementary::sigmoid: {
      const T s = T(1) / (T(1) + exp(-x));
      const T d = s * (T(1) - s);
      switch (order) {
        case 0: return s;
        case 1: return d;
        case 2: return d * (T(1) - T(2) * s);
        default: return d * (T(1) - T(6) * s + T(6) * s * s);
      }
    }
    case Elementary::sin:
      switch (order) {
        case 0: return sin(x);
        case 1: return cos(x);
        case 2: return -sin(x);
        default: return -cos(x);
      }
    case Elementary::swish: {
      const T s = T(1) / (T(1) + exp(-x));
      const T d = s * (T(1) - s);
      switch (order) {
        case 0: return x * s;
        case 1: return s + x * d;
        case 2: return T(2) * d + x * d * (T(1) - T(2) * s);
        default:
          return T(3) * d * (T(1) - T(2) * s) + x * d * (T(1) - T(6) * s + T(6) * s * s);
      }
    }
    case Elementary::exp:
      return exp(x);
    case Elementary::negate:
      return order == 0 ? -x : (order == 1 ? T(-1) : T(0));
    case Elementary::square:
      return order == 0 ? x * x : (order == 1 ? T(2) * x : (order == 2 ? T(2) : T(0)));
  }
  throw ConfigError("unknown elementary function id");
}

// ---------------------------------------------------------------------------
// Plain jets

/// Value with partial derivatives in physical coordinates.
template <class T>
struct BasicJet {
  T v{};
  T dx{};
  T dt{};
  T dxx{};

  static BasicJet constant(T value) { return {value, T(0), T(0), T(0)}; }
};

using Jet = BasicJet<double>;

template <class T>
BasicJet<T> jet_unary(Elementary f, const BasicJet<T>& u) {
  const T d0 = elementary_derivative<T>(f, 0, u.v);
  const T d1 = elementary_derivative<T>(f, 1, u.v);
  const T d2 = elementary_derivative<T>(f, 2, u.v);
  return {d0, d1 * u.dx, d1 * u.dt, d2 * u.dx * u.dx + d1 * u.dxx};
}

enum class BinaryOp { add, sub, mul };

template <class T>
BasicJet<T> jet_binary(BinaryOp op, const BasicJet<T>& u, const BasicJet<T>& w) {
  switch (op) {
    case BinaryOp::add: return {u.v + w.v, u.dx + w.dx, u.dt + w.dt, u.dxx + w.dxx};
    case BinaryOp::sub: return {u.v - w.v, u.dx - w.dx, u.dt - w.dt, u.dxx - w.dxx};
    case BinaryOp::mul:
      return {u.v * w.v, u.dx * w.v + u.v * w.dx, u.dt * w.v + u.v * w.dt,
              u.dxx * w.v + T(2) * u.dx * w.dx + u.v * w.dxx};
  }
  throw UsageError("unknown binary jet operation");
}

template <class T>
BasicJet<T> operator+(const BasicJet<T>& a, const BasicJet<T>& b) { return jet_binary(BinaryOp::add, a, b); }
template <class T>
BasicJet<T> operator-(const BasicJet<T>& a, const BasicJet<T>& b) { return jet_binary(BinaryOp::sub, a, b); }
template <class T>
BasicJet<T> operator*(const BasicJet<T>& a, const BasicJet<T>& b) { return jet_binary(BinaryOp::mul, a, b); }
template <class T>
BasicJet<T> operator*(T c, const BasicJet<T>& a) { return {c * a.v, c * a.dx, c * a.dt, c * a.dxx}; }

template <class T>
bool is_finite(const BasicJet<T>& j) {
  using std::isfinite;
  return isfinite(j.v) && isfinite(j.dx) && isfinite(j.dt) && isfinite(j.dxx);
}

// ---------------------------------------------------------------------------
// Reverse-mode tape

/// Vectorized elementwise `order`-th derivative of f.
Array elementary_array(Elementary f, int order, const Array& x);
/// The quantity every derivative order of f is built from (tanh x for tanh,
/// the logistic of x for sigmoid and swish, exp x, sin x); empty when f needs
/// none.
Array elementary_primitive(Elementary f, const Array& x);
/// `order`-th derivative of f given x and elementary_primitive(f, x).
Array elementary_from_primitive(Elementary f, int order, const Array& x, const Array& primitive);

class Tape;

/// Handle to a node on a Tape. Invalidated by Tape::reset().
class Var {
 public:
  Var() = default;

  const Array& value() const;
  double scalar() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation)
      : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

class Tape {
 public:
  using Visitor = std::function<void(std::size_t node)>;

  /// Parameter nodes read their values from `params`, which must stay alive
  /// and unchanged while the tape is in use.
  explicit Tape(std::span<const double> params = {});

  /// Drops all nodes (storage is kept for reuse) and rebinds the parameters.
  void reset(std::span<const double> params);

  std::size_t size() const { return size_; }
  std::size_t parameter_count() const { return params_.size(); }

  Var constant(const Array& value);
  Var constant(double value);
  /// rows x cols block of the parameter vector starting at `offset`, row-major.
  Var parameter(std::size_t offset, Eigen::Index rows, Eigen::Index cols);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var shift(Var a, double c);
  Var matmul(Var w, Var a);
  /// Elementwise `order`-th derivative of f applied to a.
  Var unary(Elementary f, Var a, int order = 0);
  /// f(a), f'(a), f''(a) sharing one evaluation of the primitive.
  std::array<Var, 3> unary_derivatives(Elementary f, Var a);
  Var mean(Var a);
  Var sum(Var a);

  /// d(loss)/d(params). `loss` must be a 1x1 node recorded on this tape.
  std::vector<double> gradient(Var loss, const Visitor& visit = {});
  void gradient(Var loss, std::span<double> out, const Visitor& visit = {});

  const Array& value(Var v) const;

 private:
  enum class Op : std::uint8_t { constant, parameter, add, sub, mul, scale, shift, matmul, unary, mean, sum };

  struct Node {
    Op op = Op::constant;
    bool requires_grad = false;
    std::size_t a = 0;
    std::size_t b = 0;
    double c = 0.0;
    Elementary f = Elementary::tanh;
    int order = 0;
    std::size_t offset = 0;
    std::size_t base = 0;  // unary: node holding the primitive
    Array value;
    Array primitive;
  };

  Node& push(Op op);
  Var handle(std::size_t id) { return Var(this, id, generation_); }
  void check(const Var& v) const;
  Var binary(Op op, Var a, Var b);
  void accumulate(std::size_t node, const Array& g);
  template <class Expr>
  void accumulate_expr(std::size_t node, const Expr& g);

  std::span<const double> params_;
  std::deque<Node> nodes_;
  std::deque<Array> adjoints_;
  std::vector<char> has_adjoint_;
  std::size_t size_ = 0;
  std::uint64_t generation_ = 1;
};

inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }

/// Jet whose components are tape variables.
struct TapeJet {
  Var v;
  Var dx;
  Var dt;
  Var dxx;
};

TapeJet jet_unary(Tape& tape, Elementary f, const TapeJet& u);
TapeJet jet_binary(Tape& tape, BinaryOp op, const TapeJet& u, const TapeJet& w);

}  // namespace fisher
