#pragma once

// Fisher's equation  u_t - mu u_xx = rho u (1 - u)  and its closed-form
// traveling wave with speed c = 5 sqrt(rho / 6) (in x / sqrt(mu) units).

#include <span>
#include <string_view>
#include <vector>

#include "fisher/autodiff.hpp"
#include "fisher/domain.hpp"

namespace fisher {

/// through: the residual weights are part of the differentiated loss.
/// stop: they are recomputed every step but held constant for the gradient.
enum class WeightGradient { through, stop };

WeightGradient parse_weight_gradient(std::string_view name);
std::string_view to_string(WeightGradient g);

struct FisherProblem {
  Domain domain;
  double mu = 10.0;
  double lambda = 0.0;  // residual weighting strength
  WeightGradient weight_gradient = WeightGradient::through;

  void validate() const;
};

/// Logistic reaction term F(u; rho) = rho u (1 - u).
inline double reaction(double u, double rho) { return rho * u * (1.0 - u); }
/// dF/du = rho (1 - 2u).
inline double reaction_derivative(double u, double rho) { return rho * (1.0 - 2.0 * u); }

/// u_t - mu u_xx - F(u); the jet must carry physical-coordinate derivatives.
template <class T>
T residual(const BasicJet<T>& u, T rho, T mu) {
  return u.dt - mu * u.dxx - rho * u.v * (T(1) - u.v);
}

/// Residual weight 1 / (lambda |F(u)| + 1), in (0, 1].
template <class T>
T weight(T u, T rho, T lambda) {
  if (lambda < T(0)) throw UsageError("lambda must be non-negative");
  const T f = rho * u * (T(1) - u);
  return T(1) / (lambda * (f < T(0) ? -f : f) + T(1));
}

/// d(omega)/du, taking d|F|/dF = 0 at F = 0.
inline double weight_derivative(double u, double rho, double lambda) {
  const double f = reaction(u, rho);
  const double w = weight(u, rho, lambda);
  const double sign = f > 0.0 ? 1.0 : (f < 0.0 ? -1.0 : 0.0);
  return -lambda * w * w * sign * reaction_derivative(u, rho);
}

/// Traveling-wave solution [1 + exp(sqrt(rho/6) x/sqrt(mu) - 5 rho t / 6)]^-2.
double analytical(double x, double t, double rho, double mu);
/// Same with closed-form physical derivatives.
Jet analytical_jet(double x, double t, double rho, double mu);

struct ResidualSample {
  Point point;
  double u = 0.0;
  double f = 0.0;
  double omega = 1.0;
};

ResidualSample make_residual_sample(const Point& p, const Jet& u, const FisherProblem& problem);

/// Mean squared error between predictions and targets.
double data_loss(std::span<const double> predictions, std::span<const double> targets);
/// Mean of (omega f)^2 over the samples.
double physics_loss(std::span<const ResidualSample> samples);
inline double total_loss(double data, double physics) { return data + physics; }

// Tape versions used by training.

/// Residual row for a batch; `rho` is a 1 x B (or 1 x 1) constant.
Var record_residual(Tape& tape, const TapeJet& u, Var rho, double mu);
/// Weights for a 1 x B prediction row. With WeightGradient::stop they are
/// recorded as constants. With WeightGradient::through the node carries the
/// same values plus the local derivative d(omega)/du, so the reverse sweep
/// differentiates through them.
Var record_weights(Tape& tape, Var u, const Array& rho, double lambda,
                   WeightGradient mode = WeightGradient::through);
Var record_data_loss(Tape& tape, Var predictions, const Array& targets);
Var record_physics_loss(Tape& tape, Var residuals, Var weights);

}  // namespace fisher
