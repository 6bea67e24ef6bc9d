#pragma once

#include <optional>

#include "fisher/error.hpp"

namespace fisher {

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  /// Affine map onto [0, 1].
  double unit(double v) const { return (v - lo) / (hi - lo); }
  double from_unit(double s) const { return lo + s * (hi - lo); }
};

/// Spatio-temporal point, optionally tagged with a reaction rate.
struct Point {
  double x = 0.0;
  double t = 0.0;
  double rho = 0.0;
};

/// Computational box. `rho_range` is set for continuous-rho (generalizing)
/// problems; otherwise `rho` is the single coefficient.
struct Domain {
  Interval x{-5.0, 5.0};
  Interval t{0.0, 0.004};
  double rho = 1e3;
  std::optional<Interval> rho_range;

  bool generalizing() const { return rho_range.has_value(); }

  void validate() const {
    if (!(x.lo < x.hi)) throw ConfigError("degenerate x range");
    if (!(t.lo < t.hi)) throw ConfigError("degenerate t range");
    if (generalizing()) {
      if (!(rho_range->lo > 0.0 && rho_range->lo < rho_range->hi)) throw ConfigError("invalid rho range");
    } else if (!(rho > 0.0)) {
      throw ConfigError("rho must be positive");
    }
  }
};

}  // namespace fisher
