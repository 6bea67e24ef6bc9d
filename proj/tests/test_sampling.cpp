#include <doctest.h>

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "fisher/sampling.hpp"

using namespace fisher;

namespace {

FisherProblem discrete(double rho = 1e3) {
  FisherProblem p;
  p.domain.rho = rho;
  return p;
}

FisherProblem generalizing() {
  FisherProblem p;
  p.domain.rho_range = Interval{1e2, 1e4};
  return p;
}

// P(K < lo or K > hi) for K ~ Binomial(n, p), summed term by term.
double binomial_outside(int n, double p, int lo, int hi) {
  double tail = 0.0;
  for (int k = 0; k <= n; ++k) {
    if (k >= lo && k <= hi) continue;
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                            k * std::log(p) + (n - k) * std::log1p(-p);
    tail += std::exp(log_term);
  }
  return tail;
}

}  // namespace

TEST_SUITE("sampling") {
  TEST_CASE("LHS puts exactly one point in every stratum") {
    Rng rng = make_rng(1, 0);
    const std::array<Interval, 2> box{Interval{-5, 5}, Interval{0, 0.004}};
    const auto pts = lhs(4, box, rng);
    for (std::size_t d = 0; d < 2; ++d) {
      std::set<int> strata;
      for (const auto& p : pts) strata.insert(static_cast<int>(std::floor(box[d].unit(p[d]) * 4)));
      CHECK(strata.size() == 4);
    }

    const auto one = lhs(1, box, rng);
    REQUIRE(one.size() == 1);
    CHECK(box[0].contains(one[0][0]));
    CHECK(box[1].contains(one[0][1]));
  }

  TEST_CASE("LHS deciles receive exactly n/10 points") {
    Rng rng = make_rng(9, 3);
    const std::array<Interval, 3> box{Interval{-5, 5}, Interval{0, 0.004}, Interval{1e2, 1e4}};
    const auto pts = lhs(1000, box, rng);
    for (std::size_t d = 0; d < 3; ++d) {
      std::array<int, 10> counts{};
      for (const auto& p : pts) ++counts[std::min(9, static_cast<int>(box[d].unit(p[d]) * 10))];
      for (int c : counts) CHECK(c == 100);
    }
  }

  TEST_CASE("sampling is determined by seed and epoch") {
    const FisherProblem p = discrete();
    Rng a = make_rng(5, 17), b = make_rng(5, 17), c = make_rng(5, 18), d = make_rng(6, 17);
    const auto pa = sample_collocation(64, p, a);
    const auto pb = sample_collocation(64, p, b);
    const auto pc = sample_collocation(64, p, c);
    const auto pd = sample_collocation(64, p, d);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].x == pb[i].x);
      CHECK(pa[i].t == pb[i].t);
    }
    CHECK(pa[0].x != pc[0].x);
    CHECK(pa[0].x != pd[0].x);

    Rng e = make_rng(5, 17), f = make_rng(5, 17);
    const auto la = sample_ann_data(32, p, e);
    const auto lb = sample_ann_data(32, p, f);
    for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i].u == lb[i].u);
  }

  TEST_CASE("boundary points lie on the three segments") {
    const FisherProblem p = discrete();
    Rng rng = make_rng(2, 0);
    for (const LabeledPoint& l : sample_boundary(1024, p, rng)) {
      const bool on = l.point.t == 0.0 || l.point.x == -5.0 || l.point.x == 5.0;
      CHECK(on);
      CHECK(l.u == analytical(l.point.x, l.point.t, 1e3, p.mu));
      CHECK(l.point.rho == 1e3);
    }
    CHECK_THROWS_AS(sample_boundary(2, p, rng), UsageError);
  }

  TEST_CASE("boundary segment counts stay inside the binomial band") {
    // The band [271, 412] for n = 1024 must be a > 0.999 event per segment.
    CHECK(3.0 * binomial_outside(1024, 1.0 / 3.0, 271, 412) < 1e-3);
    const FisherProblem p = discrete();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng = make_rng(seed, 0);
      std::array<int, 3> counts{};
      for (const LabeledPoint& l : sample_boundary(1024, p, rng)) {
        if (l.point.t == 0.0 && l.point.x != -5.0 && l.point.x != 5.0)
          ++counts[0];
        else if (l.point.x == -5.0)
          ++counts[1];
        else
          ++counts[2];
      }
      for (int c : counts) {
        CHECK(c >= 271);
        CHECK(c <= 412);
      }
    }
  }

  TEST_CASE("generalizing labeled data uses only the range endpoints") {
    const FisherProblem p = generalizing();
    Rng rng = make_rng(4, 1);
    int low = 0;
    for (const LabeledPoint& l : sample_boundary(512, p, rng)) {
      CHECK((l.point.rho == 1e2 || l.point.rho == 1e4));
      low += l.point.rho == 1e2;
    }
    CHECK(low > 100);
    CHECK(low < 412);
    for (const LabeledPoint& l : sample_ann_data(512, p, rng)) CHECK((l.point.rho == 1e2 || l.point.rho == 1e4));

    bool interior = false;
    for (const Point& c : sample_collocation(512, p, rng)) {
      CHECK(c.rho >= 1e2);
      CHECK(c.rho <= 1e4);
      interior = interior || (c.rho > 1e2 && c.rho < 1e4);
    }
    CHECK(interior);
  }

  TEST_CASE("ANN data is interior and labeled by the oracle") {
    const FisherProblem p = discrete(1e2);
    Rng rng = make_rng(8, 0);
    const auto data = sample_ann_data(1024, p, rng);
    CHECK(data.size() == 1024);
    for (const LabeledPoint& l : data) {
      CHECK(l.point.x > -5.0);
      CHECK(l.point.x < 5.0);
      CHECK(l.point.t > 0.0);
      CHECK(l.point.t < 0.004);
      CHECK(l.u > 0.0);
      CHECK(l.u < 1.0);
    }
  }

  TEST_CASE("test grids") {
    const Domain d;
    const auto g = test_grid(d);
    CHECK(g.size() == 10000);
    CHECK(g.front().x == -5.0);
    CHECK(g.front().t == 0.0);
    CHECK(g.back().x == 5.0);
    CHECK(g.back().t == 0.004);

    std::vector<double> rhos(20);
    for (int i = 0; i < 20; ++i) rhos[i] = 100.0 * (i + 1);
    const auto big = test_grid(d, 100, 100, rhos);
    CHECK(big.size() == 200000);
    CHECK(big.back().rho == 2000.0);
    CHECK_THROWS_AS(test_grid(d, 1, 100), UsageError);
  }
}
