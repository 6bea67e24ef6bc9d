#include "fisher/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace fisher {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double pick_rho(const Domain& d, Rng& rng) {
  if (!d.generalizing()) return d.rho;
  return std::bernoulli_distribution(0.5)(rng) ? d.rho_range->hi : d.rho_range->lo;
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

std::vector<std::array<double, 3>> lhs(std::size_t n, std::span<const Interval> bounds, Rng& rng) {
  if (n == 0) throw UsageError("LHS needs at least one point");
  if (bounds.size() < 1 || bounds.size() > 3) throw UsageError("LHS supports 1 to 3 dimensions");
  std::vector<std::array<double, 3>> out(n, std::array<double, 3>{});
  std::vector<std::size_t> strata(n);
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = (static_cast<double>(strata[i]) + uniform01(rng)) / static_cast<double>(n);
      out[i][d] = bounds[d].from_unit(s);
    }
  }
  return out;
}

std::vector<LabeledPoint> sample_boundary(std::size_t n, const FisherProblem& problem, Rng& rng) {
  if (n < 3) throw UsageError("boundary sampling needs at least three points");
  const Domain& d = problem.domain;
  std::uniform_int_distribution<int> segment(0, 2);
  std::vector<LabeledPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point p;
    switch (segment(rng)) {
      case 0:
        p.t = d.t.lo;
        p.x = d.x.from_unit(uniform01(rng));
        break;
      case 1:
        p.x = d.x.lo;
        p.t = d.t.from_unit(uniform01(rng));
        break;
      default:
        p.x = d.x.hi;
        p.t = d.t.from_unit(uniform01(rng));
        break;
    }
    p.rho = pick_rho(d, rng);
    out.push_back({p, analytical(p.x, p.t, p.rho, problem.mu)});
  }
  return out;
}

std::vector<Point> sample_collocation(std::size_t n, const FisherProblem& problem, Rng& rng) {
  const Domain& d = problem.domain;
  std::vector<Interval> bounds{d.x, d.t};
  if (d.generalizing()) bounds.push_back(*d.rho_range);
  const auto raw = lhs(n, bounds, rng);
  std::vector<Point> out;
  out.reserve(n);
  for (const auto& r : raw) out.push_back({r[0], r[1], d.generalizing() ? r[2] : d.rho});
  return out;
}

std::vector<LabeledPoint> sample_ann_data(std::size_t n, const FisherProblem& problem, Rng& rng) {
  const Domain& d = problem.domain;
  const std::vector<Interval> bounds{d.x, d.t};
  const auto raw = lhs(n, bounds, rng);
  std::vector<LabeledPoint> out;
  out.reserve(n);
  for (const auto& r : raw) {
    Point p{r[0], r[1], 0.0};
    p.rho = pick_rho(d, rng);
    out.push_back({p, analytical(p.x, p.t, p.rho, problem.mu)});
  }
  return out;
}

std::vector<Point> test_grid(const Domain& domain, std::size_t nx, std::size_t nt, std::span<const double> rhos) {
  if (nx < 2 || nt < 2) throw UsageError("test grid needs at least two points per axis");
  const std::vector<double> own{domain.rho};
  const std::span<const double> values = rhos.empty() ? std::span<const double>(own) : rhos;
  std::vector<Point> out;
  out.reserve(nx * nt * values.size());
  for (const double rho : values) {
    for (std::size_t j = 0; j < nt; ++j) {
      const double t = domain.t.from_unit(static_cast<double>(j) / static_cast<double>(nt - 1));
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = domain.x.from_unit(static_cast<double>(i) / static_cast<double>(nx - 1));
        out.push_back({x, t, rho});
      }
    }
  }
  return out;
}

}  // namespace fisher
