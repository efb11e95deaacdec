#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace robust_bundling::quadrature {

inline constexpr double kDefaultRelTol = 1e-13;
inline constexpr unsigned kMaxDepth = 12;

/// Adaptive Gauss-Kronrod integral of a smooth integrand over [a, b].
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = kDefaultRelTol) {
  if (!(b > a)) {
    return 0.0;
  }
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, kMaxDepth, rel_tol, &err);
}

/// Same as integrate(), but panels are split at every breakpoint strictly inside
/// (a, b) so that kinks of a piecewise-smooth integrand sit on panel edges.
template <class F>
double integrate_split(F&& f, double a, double b, std::vector<double> breaks,
                       double rel_tol = kDefaultRelTol) {
  if (!(b > a)) {
    return 0.0;
  }
  std::erase_if(breaks, [&](double x) { return !(x > a && x < b); });
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  double lo = a;
  for (double x : breaks) {
    total += integrate(f, lo, x, rel_tol);
    lo = x;
  }
  total += integrate(f, lo, b, rel_tol);
  return total;
}

}  // namespace robust_bundling::quadrature
