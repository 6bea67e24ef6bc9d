#include <doctest.h>

#include <cmath>
#include <vector>

#include "fisher/autodiff.hpp"

using namespace fisher;

namespace {

using LJet = BasicJet<long double>;

// Central differences of a scalar function of (x, t).
template <class F>
Jet fd_jet(F f, double x, double t, long double h = 1e-4L) {
  const long double X = x, T = t;
  Jet j;
  j.v = static_cast<double>(f(X, T));
  j.dx = static_cast<double>((f(X + h, T) - f(X - h, T)) / (2 * h));
  j.dt = static_cast<double>((f(X, T + h) - f(X, T - h)) / (2 * h));
  j.dxx = static_cast<double>((f(X + h, T) - 2 * f(X, T) + f(X - h, T)) / (h * h));
  return j;
}

void close(double a, double b, double rel) {
  CHECK(std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}));
}

const Elementary kAll[] = {Elementary::tanh, Elementary::sigmoid, Elementary::sin, Elementary::swish,
                           Elementary::exp,  Elementary::negate,  Elementary::square};

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("jet arithmetic examples") {
    const Jet x{2.0, 1.0, 0.0, 0.0};
    const Jet y = x * x;
    CHECK(y.v == 4.0);
    CHECK(y.dx == 4.0);
    CHECK(y.dt == 0.0);
    CHECK(y.dxx == 2.0);

    const Jet t{0.5, 0.0, 1.0, 0.0};
    const Jet p = x * t;
    CHECK(p.v == 1.0);
    CHECK(p.dx == 0.5);
    CHECK(p.dt == 2.0);
    CHECK(p.dxx == 0.0);
  }

  TEST_CASE("constant jets stay constant") {
    const Jet c = Jet::constant(0.3);
    for (Elementary f : kAll) {
      const Jet r = jet_unary(f, c);
      CHECK(r.dx == 0.0);
      CHECK(r.dt == 0.0);
      CHECK(r.dxx == 0.0);
    }
  }

  TEST_CASE("product rule matches Leibniz for second derivatives") {
    // u = sin(x) t, w = exp(x t); d2(uw)/dx2 = u'' w + 2 u' w' + u w''
    const double x = 0.7, t = 1.3;
    const Jet X{x, 1, 0, 0}, T{t, 0, 1, 0};
    const Jet u = jet_unary(Elementary::sin, X) * T;
    const Jet w = jet_unary(Elementary::exp, X * T);
    const Jet uw = u * w;
    const double ux = std::cos(x) * t, uxx = -std::sin(x) * t;
    const double wv = std::exp(x * t), wx = t * wv, wxx = t * t * wv;
    close(uw.dxx, uxx * wv + 2 * ux * wx + std::sin(x) * t * wxx, 1e-13);
  }

  TEST_CASE("every elementary function agrees with finite differences") {
    for (Elementary f : kAll) {
      CAPTURE(to_string(f));
      for (double x0 : {-1.7, -0.2, 0.4, 2.1}) {
        // Chain through a non-trivial inner map so all jet slots are exercised.
        const double t0 = 0.3;
        const auto inner = [](long double x, long double t) { return 0.8L * x - 1.1L * t + 0.5L * x * x; };
        const auto outer = [&](long double x, long double t) {
          return elementary_derivative<long double>(f, 0, inner(x, t));
        };
        const Jet X{x0, 1, 0, 0}, T{t0, 0, 1, 0};
        const Jet z = 0.8 * X - 1.1 * T + 0.5 * (X * X);
        const Jet got = jet_unary(f, z);
        const Jet ref = fd_jet(outer, x0, t0);
        close(got.v, ref.v, 1e-12);
        close(got.dx, ref.dx, 1e-6);
        close(got.dt, ref.dt, 1e-6);
        close(got.dxx, ref.dxx, 1e-6);
      }
    }
  }

  TEST_CASE("higher derivative orders agree with finite differences") {
    for (Elementary f : {Elementary::tanh, Elementary::sigmoid, Elementary::sin, Elementary::swish}) {
      CAPTURE(to_string(f));
      for (int order = 1; order <= 3; ++order) {
        for (long double x : {-1.3L, 0.1L, 0.9L}) {
          const long double h = 1e-5L;
          const long double fd = (elementary_derivative<long double>(f, order - 1, x + h) -
                                  elementary_derivative<long double>(f, order - 1, x - h)) /
                                 (2 * h);
          close(elementary_derivative<double>(f, order, static_cast<double>(x)), static_cast<double>(fd), 1e-8);
        }
      }
    }
    CHECK_THROWS_AS(elementary_derivative<double>(Elementary::tanh, 4, 0.0), UsageError);
    CHECK_THROWS_AS(parse_elementary("relu"), ConfigError);
    CHECK(parse_elementary("sine") == Elementary::sin);
  }

  TEST_CASE("vectorized derivatives match the scalar definitions") {
    Array x(1, 9);
    x << -30, -4, -1.5, -0.3, 0, 0.2, 1.1, 3.5, 30;
    for (Elementary f : {Elementary::tanh, Elementary::sigmoid, Elementary::sin, Elementary::swish, Elementary::exp}) {
      CAPTURE(to_string(f));
      for (int order = 0; order <= 3; ++order) {
        const Array a = elementary_array(f, order, x);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const double ref = elementary_derivative<double>(f, order, x(i));
          CHECK(std::abs(a(i) - ref) <= 1e-14 * std::max(1.0, std::abs(ref)));
        }
      }
    }
  }

  TEST_CASE("tape gradient of a square") {
    const std::vector<double> params{3.0, 5.0};
    Tape tape(params);
    const Var theta = tape.parameter(0, 1, 1);
    const Var other = tape.parameter(1, 1, 1);
    (void)other;
    const Var loss = tape.mul(theta, theta);
    const std::vector<double> g = tape.gradient(loss);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == 6.0);
    CHECK(g[1] == 0.0);
  }

  TEST_CASE("tape matmul, broadcasting and reductions") {
    // loss = mean(tanh(W a + b)) for a 2x3 W and a 3x4 batch.
    std::vector<double> params{0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.05, -0.07};
    const Array a = Array::Random(3, 4);
    const auto loss_of = [&](const std::vector<double>& p) {
      Tape tape(p);
      const Var w = tape.parameter(0, 2, 3);
      const Var b = tape.parameter(6, 2, 1);
      const Var z = tape.add(tape.matmul(w, tape.constant(a)), b);
      return tape.value(tape.mean(tape.unary(Elementary::tanh, z))).value();
    };
    Tape tape(params);
    const Var w = tape.parameter(0, 2, 3);
    const Var b = tape.parameter(6, 2, 1);
    const Var loss = tape.mean(tape.unary(Elementary::tanh, tape.add(tape.matmul(w, tape.constant(a)), b)));
    const std::vector<double> g = tape.gradient(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      std::vector<double> hi = params, lo = params;
      hi[i] += 1e-6;
      lo[i] -= 1e-6;
      close(g[i], (loss_of(hi) - loss_of(lo)) / 2e-6, 1e-7);
    }
  }

  TEST_CASE("tape jets agree with plain jets") {
    const std::vector<double> params{0.7};
    Tape tape(params);
    const Var p = tape.parameter(0, 1, 1);
    Array xs(1, 3);
    xs << -0.5, 0.2, 1.4;
    const TapeJet x{tape.mul(tape.constant(xs), p), p, tape.constant(0.0), tape.constant(0.0)};
    const TapeJet y = jet_unary(tape, Elementary::sigmoid, jet_binary(tape, BinaryOp::mul, x, x));
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      const Jet px{xs(i) * 0.7, 0.7, 0, 0};
      const Jet ref = jet_unary(Elementary::sigmoid, px * px);
      const auto at = [&](const Var& v) { return v.value().size() == 1 ? v.value()(0) : v.value()(i); };
      close(at(y.v), ref.v, 1e-15);
      close(at(y.dx), ref.dx, 1e-15);
      close(at(y.dxx), ref.dxx, 1e-15);
    }
  }

  TEST_CASE("tape misuse is reported") {
    const std::vector<double> params{1.0, 2.0};
    Tape tape(params);
    Tape other(params);
    const Var p = tape.parameter(0, 1, 1);
    const Var foreign = other.parameter(0, 1, 1);
    CHECK_THROWS_AS(tape.gradient(foreign), UsageError);
    CHECK_THROWS_AS(tape.gradient(tape.constant(Array::Ones(1, 3))), UsageError);
    CHECK_THROWS_AS(tape.parameter(1, 2, 1), UsageError);
    CHECK_THROWS_AS(Var().value(), UsageError);
    tape.reset(params);
    CHECK_THROWS_AS(tape.gradient(p), UsageError);
  }

  TEST_CASE("reverse sweep visits nodes in reverse recording order") {
    const std::vector<double> params{0.5};
    Tape tape(params);
    const Var p = tape.parameter(0, 1, 1);
    const Var q = tape.mul(p, p);
    const Var r = tape.add(q, p);
    std::vector<std::size_t> seen;
    tape.gradient(r, [&](std::size_t n) { seen.push_back(n); });
    REQUIRE(!seen.empty());
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] < seen[i - 1]);
    CHECK(seen.front() == r.id());
  }
}
