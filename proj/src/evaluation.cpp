#include "fisher/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "fisher/sampling.hpp"

namespace fisher {

Surrogate network_surrogate(const Network& net, ParameterVector params) {
  auto shared = std::make_shared<const ParameterVector>(std::move(params));
  Surrogate s;
  s.generalizing = net.config().generalizing;
  s.value = [net, shared](const Point& p) { return net.value<double>(*shared, p); };
  s.jet = [net, shared](const Point& p) { return net.jet<double>(*shared, p); };
  return s;
}

Surrogate oracle_surrogate(double mu, bool generalizing) {
  Surrogate s;
  s.generalizing = generalizing;
  s.value = [mu](const Point& p) { return analytical(p.x, p.t, p.rho, mu); };
  s.jet = [mu](const Point& p) { return analytical_jet(p.x, p.t, p.rho, mu); };
  return s;
}

double l2_error(const Predictor& predict, std::span<const Point> grid, double mu) {
  if (grid.empty()) throw UsageError("L2 error over an empty grid");
  double acc = 0.0;
  for (const Point& p : grid) {
    const double d = analytical(p.x, p.t, p.rho, mu) - predict(p);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(grid.size()));
}

double l2_error(const Surrogate& model, const FisherProblem& problem) {
  const auto grid = test_grid(problem.domain);
  return l2_error(model.value, grid, problem.mu);
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw UsageError("log_space needs n >= 2 and 0 < lo < hi");
  std::vector<double> out(n);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> interior_rhos(const Interval& range, std::size_t count) {
  if (count == 0) throw UsageError("need at least one interior rho");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = range.from_unit(static_cast<double>(i + 1) / static_cast<double>(count + 1));
  return out;
}

std::vector<double> default_sweep_rhos() { return log_space(1e2, 1e5, 50); }

std::vector<SweepPoint> rho_sweep(const Surrogate& model, const FisherProblem& problem, std::span<const double> rhos) {
  if (!model.generalizing) throw UsageError("rho sweep needs a generalizing model");
  std::vector<SweepPoint> out;
  out.reserve(rhos.size());
  for (const double rho : rhos) {
    const double r[] = {rho};
    const auto grid = test_grid(problem.domain, 100, 100, r);
    out.push_back({rho, l2_error(model.value, grid, problem.mu)});
  }
  return out;
}

double interior_l2(const Surrogate& model, const FisherProblem& problem, std::size_t count) {
  if (!problem.domain.rho_range) throw UsageError("interior L2 needs a rho range");
  const auto rhos = interior_rhos(*problem.domain.rho_range, count);
  const auto sweep = rho_sweep(model, problem, rhos);
  double acc = 0.0;
  for (const SweepPoint& s : sweep) acc += s.l2;
  return acc / static_cast<double>(sweep.size());
}

std::vector<ProfileRow> wavefront_profile(const Surrogate& model, const FisherProblem& problem, double rho, double t,
                                          std::span<const double> xs, std::span<const double> lambdas) {
  std::vector<ProfileRow> out;
  out.reserve(xs.size());
  for (const double x : xs) {
    const Point p{x, t, rho};
    const Jet u = model.jet(p);
    ProfileRow row;
    row.x = x;
    row.u_true = analytical(x, t, rho, problem.mu);
    row.u_pred = u.v;
    row.f_raw = residual(u, rho, problem.mu);
    for (const double lambda : lambdas) row.weighted.push_back(weight(u.v, rho, lambda) * row.f_raw);
    out.push_back(std::move(row));
  }
  return out;
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw UsageError("quantile of an empty list");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SeedStats aggregate(std::span<const double> values) {
  if (values.empty()) throw UsageError("cannot aggregate an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  SeedStats s;
  s.count = sorted.size();
  double sum = 0.0;
  for (const double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double var = 0.0;
  for (const double v : sorted) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(s.count));
  s.median = quantile(sorted, 0.5);
  s.q25 = quantile(sorted, 0.25);
  s.q75 = quantile(sorted, 0.75);
  return s;
}

}  // namespace fisher
