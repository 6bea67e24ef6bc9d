#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fisher/model.hpp"
#include "fisher/physics.hpp"

namespace fisher {

using Predictor = std::function<double(const Point&)>;
using JetPredictor = std::function<Jet(const Point&)>;

/// Anything that can stand in for u(x, t[; rho]): a trained network or the
/// analytical solution itself.
struct Surrogate {
  Predictor value;
  JetPredictor jet;
  bool generalizing = false;
};

Surrogate network_surrogate(const Network& net, ParameterVector params);
Surrogate oracle_surrogate(double mu, bool generalizing);

/// Root-mean-square deviation from the analytical solution over `grid`.
double l2_error(const Predictor& predict, std::span<const Point> grid, double mu);
/// Same on the default 100 x 100 grid at the problem's rho.
double l2_error(const Surrogate& model, const FisherProblem& problem);

std::vector<double> log_space(double lo, double hi, std::size_t n);
/// `count` equally spaced values strictly inside the interval.
std::vector<double> interior_rhos(const Interval& range, std::size_t count = 20);

struct SweepPoint {
  double rho = 0.0;
  double l2 = 0.0;
};

/// Per-rho L2 on the 100 x 100 (x, t) grid.
std::vector<SweepPoint> rho_sweep(const Surrogate& model, const FisherProblem& problem, std::span<const double> rhos);
/// 50 log-spaced values from 1e2 to 1e5.
std::vector<double> default_sweep_rhos();
/// Mean per-rho L2 over interior_rhos(problem rho range, count).
double interior_l2(const Surrogate& model, const FisherProblem& problem, std::size_t count = 20);

struct ProfileRow {
  double x = 0.0;
  double u_true = 0.0;
  double u_pred = 0.0;
  double f_raw = 0.0;
  std::vector<double> weighted;  // omega * f, one entry per lambda
};

std::vector<ProfileRow> wavefront_profile(const Surrogate& model, const FisherProblem& problem, double rho, double t,
                                          std::span<const double> xs, std::span<const double> lambdas);

struct SeedStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::size_t count = 0;
};

SeedStats aggregate(std::span<const double> values);
/// Linear-interpolation quantile of already sorted values.
double quantile(std::span<const double> sorted, double q);

}  // namespace fisher
