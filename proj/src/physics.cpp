#include "fisher/physics.hpp"

#include <cmath>
#include <string>

namespace fisher {

WeightGradient parse_weight_gradient(std::string_view name) {
  if (name == "through") return WeightGradient::through;
  if (name == "stop") return WeightGradient::stop;
  throw ConfigError("unknown weight gradient mode '" + std::string(name) + "'");
}

std::string_view to_string(WeightGradient g) { return g == WeightGradient::through ? "through" : "stop"; }

void FisherProblem::validate() const {
  domain.validate();
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
}

namespace {

struct WaveTerms {
  double a;  // d(exponent)/dx
  double b;  // -d(exponent)/dt
  double p;  // 1 / (1 + e)
  double q;  // e / (1 + e)
};

WaveTerms wave_terms(double x, double t, double rho, double mu) {
  WaveTerms w;
  w.a = std::sqrt(rho / 6.0) / std::sqrt(mu);
  w.b = 5.0 * rho / 6.0;
  const double z = w.a * x - w.b * t;
  if (z > 0.0) {
    const double e = std::exp(-z);
    w.p = e / (1.0 + e);
    w.q = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(z);
    w.p = 1.0 / (1.0 + e);
    w.q = e / (1.0 + e);
  }
  return w;
}

}  // namespace

double analytical(double x, double t, double rho, double mu) {
  const WaveTerms w = wave_terms(x, t, rho, mu);
  return w.p * w.p;
}

Jet analytical_jet(double x, double t, double rho, double mu) {
  const WaveTerms w = wave_terms(x, t, rho, mu);
  const double pq = w.p * w.p * w.q;
  return {w.p * w.p, -2.0 * w.a * pq, 2.0 * w.b * pq, 2.0 * w.a * w.a * pq * (2.0 * w.q - w.p)};
}

ResidualSample make_residual_sample(const Point& p, const Jet& u, const FisherProblem& problem) {
  ResidualSample s;
  s.point = p;
  s.u = u.v;
  s.f = residual(u, p.rho, problem.mu);
  s.omega = weight(u.v, p.rho, problem.lambda);
  return s;
}

double data_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) throw UsageError("data loss of an empty batch");
  if (predictions.size() != targets.size()) throw UsageError("predictions and targets differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = targets[i] - predictions[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predictions.size());
}

double physics_loss(std::span<const ResidualSample> samples) {
  if (samples.empty()) throw UsageError("physics loss of an empty batch");
  double acc = 0.0;
  for (const ResidualSample& s : samples) {
    const double wf = s.omega * s.f;
    acc += wf * wf;
  }
  return acc / static_cast<double>(samples.size());
}

Var record_residual(Tape& tape, const TapeJet& u, Var rho, double mu) {
  const Var reaction_term = tape.mul(rho, tape.mul(u.v, tape.shift(tape.scale(u.v, -1.0), 1.0)));
  return tape.sub(tape.sub(u.dt, tape.scale(u.dxx, mu)), reaction_term);
}

Var record_weights(Tape& tape, Var u, const Array& rho, double lambda, WeightGradient mode) {
  if (lambda < 0.0) throw UsageError("lambda must be non-negative");
  const Array& v = u.value();
  Array w(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    const double r = rho.size() == 1 ? rho(0, 0) : rho(0, c);
    for (Eigen::Index k = 0; k < v.rows(); ++k) w(k, c) = weight(v(k, c), r, lambda);
  }
  if (mode == WeightGradient::stop) return tape.constant(w);
  Array dw(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    const double r = rho.size() == 1 ? rho(0, 0) : rho(0, c);
    for (Eigen::Index k = 0; k < v.rows(); ++k) dw(k, c) = weight_derivative(v(k, c), r, lambda);
  }
  // w + dw (u - u0): value w, derivative dw
  return tape.add(tape.constant(w), tape.mul(tape.constant(dw), tape.sub(u, tape.constant(v))));
}

Var record_data_loss(Tape& tape, Var predictions, const Array& targets) {
  const Var diff = tape.sub(predictions, tape.constant(targets));
  return tape.mean(tape.mul(diff, diff));
}

Var record_physics_loss(Tape& tape, Var residuals, Var weights) {
  const Var wf = tape.mul(weights, residuals);
  return tape.mean(tape.mul(wf, wf));
}

}  // namespace fisher
