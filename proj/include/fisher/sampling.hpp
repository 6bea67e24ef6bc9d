#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fisher/domain.hpp"
#include "fisher/physics.hpp"

namespace fisher {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream). Training uses stream = epoch.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

struct LabeledPoint {
  Point point;
  double u = 0.0;
};

struct SampleBatch {
  std::vector<LabeledPoint> labeled;
  std::vector<Point> collocation;
};

/// Latin hypercube sample of n points in `bounds.size()` (2 or 3) dimensions.
std::vector<std::array<double, 3>> lhs(std::size_t n, std::span<const Interval> bounds, Rng& rng);

/// IC/BC points: each point lands on t = t_min, x = x_min or x = x_max with
/// equal probability. Generalizing problems use rho_min or rho_max.
std::vector<LabeledPoint> sample_boundary(std::size_t n, const FisherProblem& problem, Rng& rng);

/// LHS over (x, t), plus rho in generalizing problems.
std::vector<Point> sample_collocation(std::size_t n, const FisherProblem& problem, Rng& rng);

/// Labeled interior points for the data-driven models.
std::vector<LabeledPoint> sample_ann_data(std::size_t n, const FisherProblem& problem, Rng& rng);

/// Inclusive nx x nt grid, crossed with every value in `rhos` (or the
/// problem's own rho when `rhos` is empty).
std::vector<Point> test_grid(const Domain& domain, std::size_t nx = 100, std::size_t nt = 100,
                             std::span<const double> rhos = {});

}  // namespace fisher
