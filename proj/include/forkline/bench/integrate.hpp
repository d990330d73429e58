#pragma once

#include <cmath>
#include <stdexcept>

#include "forkline/core/task.hpp"

namespace forkline::bench {

inline auto integrand(double x) -> double { return x * x; }

inline auto trapezoid(double lo, double hi) -> double { return (hi - lo) * (integrand(lo) + integrand(hi)) / 2; }

inline void validate_integrate(double lo, double hi, double eps) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("integrate: need finite lo < hi");
  }
  if (!(eps > 0)) {
    throw std::invalid_argument("integrate: eps must be positive");
  }
}

/// Adaptive bisection: accept the two-panel estimate once it is within eps of
/// the one-panel estimate, otherwise recurse on both halves.
inline auto integrate_serial(double lo, double hi, double eps) -> double {
  double const mid = lo + (hi - lo) / 2;
  double const whole = trapezoid(lo, hi);
  double const refined = trapezoid(lo, mid) + trapezoid(mid, hi);
  if (std::abs(refined - whole) <= eps || !(lo < mid && mid < hi)) {
    return refined;
  }
  return integrate_serial(lo, mid, eps) + integrate_serial(mid, hi, eps);
}

inline auto integrate(double lo, double hi, double eps) -> task<double> {
  double const mid = lo + (hi - lo) / 2;
  double const whole = trapezoid(lo, hi);
  double const refined = trapezoid(lo, mid) + trapezoid(mid, hi);
  if (std::abs(refined - whole) <= eps || !(lo < mid && mid < hi)) {
    co_return refined;
  }
  double left = 0;
  double right = 0;
  co_await fork(&left, integrate)(lo, mid, eps);
  co_await call(&right, integrate)(mid, hi, eps);
  co_await join;
  co_return left + right;
}

} // namespace forkline::bench
