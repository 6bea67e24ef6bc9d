#pragma once

// Quadruple-precision scalar (GCC __float128 + libquadmath), used only as the
// finite-difference reference when long double cannot resolve a gradient
// component against a large loss.

#include <quadmath.h>

#include <type_traits>

namespace fisher {

struct Quad {
  __float128 v = 0;

  Quad() = default;
  template <class A>
    requires std::is_arithmetic_v<A>
  Quad(A a) : v(static_cast<__float128>(a)) {}  // NOLINT: implicit like the built-in types
  explicit Quad(__float128 q, int) : v(q) {}
  explicit operator double() const { return static_cast<double>(v); }
  explicit operator long double() const { return static_cast<long double>(v); }

  Quad operator-() const { return Quad(-v, 0); }
  Quad& operator+=(Quad o) { v += o.v; return *this; }
  Quad& operator-=(Quad o) { v -= o.v; return *this; }
  Quad& operator*=(Quad o) { v *= o.v; return *this; }
  Quad& operator/=(Quad o) { v /= o.v; return *this; }

  friend Quad operator+(Quad a, Quad b) { return Quad(a.v + b.v, 0); }
  friend Quad operator-(Quad a, Quad b) { return Quad(a.v - b.v, 0); }
  friend Quad operator*(Quad a, Quad b) { return Quad(a.v * b.v, 0); }
  friend Quad operator/(Quad a, Quad b) { return Quad(a.v / b.v, 0); }
  friend bool operator<(Quad a, Quad b) { return a.v < b.v; }
  friend bool operator>(Quad a, Quad b) { return a.v > b.v; }

  friend Quad exp(Quad a) { return Quad(expq(a.v), 0); }
  friend Quad tanh(Quad a) { return Quad(tanhq(a.v), 0); }
  friend Quad sin(Quad a) { return Quad(sinq(a.v), 0); }
  friend Quad cos(Quad a) { return Quad(cosq(a.v), 0); }
  friend bool isfinite(Quad a) { return finiteq(a.v) != 0; }
};

}  // namespace fisher
