#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "robust_bundling/errors.hpp"
#include "robust_bundling/quadrature.hpp"
#include "robust_bundling/saddle_core.hpp"

namespace robust_bundling {

/// Finite-support distribution over value vectors.
struct DiscreteDistribution {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }

  /// Throws InvalidArgument unless weights are a probability vector and
  /// points are componentwise nonnegative.
  void validate() const {
    if (points.size() != weights.size()) {
      throw InvalidArgument("points and weights differ in length");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!(weights[k] >= 0.0)) {
        throw InvalidArgument("negative weight");
      }
      total += weights[k];
      if (points[k].size() != dim()) {
        throw InvalidArgument("ragged support point");
      }
      for (double v : points[k]) {
        if (!(v >= 0.0)) {
          throw InvalidArgument("support point outside the nonnegative orthant");
        }
      }
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw InvalidArgument("weights do not sum to one");
    }
  }

  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      acc += weights[k] * f(std::span<const double>(points[k]));
    }
    return acc;
  }
};

/// Distribution of the driving variable x on [1, inf).
///
/// Without a shift x has cdf H(y) = 1 - 1/y. With a shift eps at cut c, mass
/// above c is moved right by eps: x = y for y <= c and x = y + eps for y > c,
/// y ~ H. The resulting cdf is flat on (c, c + eps).
struct ParetoDriver {
  double cut = std::numeric_limits<double>::infinity();
  double shift = 0.0;

  bool shifted() const { return shift > 0.0 && std::isfinite(cut); }

  double x_of_y(double y) const { return shifted() && y > cut ? y + shift : y; }

  /// Smallest y mapped at or above x.
  double y_of_x(double x) const {
    if (!shifted() || x <= cut) {
      return x;
    }
    return std::max(x - shift, cut);
  }

  double cdf(double x) const {
    if (x < 1.0) {
      return 0.0;
    }
    if (!shifted() || x <= cut) {
      return 1.0 - 1.0 / x;
    }
    if (x < cut + shift) {
      return 1.0 - 1.0 / cut;
    }
    return 1.0 - 1.0 / (x - shift);
  }

  /// P(x >= t).
  double tail(double t) const {
    if (t <= 1.0) {
      return 1.0;
    }
    if (!shifted() || t <= cut) {
      return 1.0 / t;
    }
    if (t <= cut + shift) {
      return 1.0 / cut;
    }
    return 1.0 / (t - shift);
  }
};

struct CurveBundle {
  double alpha = 0.0;
  double beta = 0.0;
  double ell = 0.0;
};

/// Worst-case distribution: a one-dimensional curve of value vectors
/// V_i(x) = gamma_i min(alpha_K x, beta_K), K the bundle of item i, driven by
/// x with the Pareto-type cdf of `driver`. All coordinates are constant for
/// x >= max_K ell_K, which carries the remaining mass as a top atom.
struct CurveDistribution {
  std::size_t n = 0;
  Partition partition;
  std::vector<CurveBundle> bundles;
  std::vector<double> item_shares;
  std::vector<std::size_t> bundle_of;
  ParetoDriver driver;

  static CurveDistribution from_solution(const SaddleSolution& sol) {
    CurveDistribution d;
    d.n = sol.n();
    d.partition = sol.partition;
    d.item_shares = sol.item_shares;
    d.bundle_of = block_of(sol.partition, d.n);
    for (const auto& b : sol.bundles) {
      d.bundles.push_back({b.alpha, b.beta, b.beta / b.alpha});
    }
    return d;
  }

  double max_ell() const {
    double L = 1.0;
    for (const auto& b : bundles) {
      L = std::max(L, b.ell);
    }
    return L;
  }

  double value(std::size_t i, double x) const {
    const CurveBundle& b = bundles[bundle_of[i]];
    return item_shares[i] * std::min(b.alpha * x, b.beta);
  }

  std::vector<double> values_at(double x) const {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = value(i, x);
    }
    return v;
  }

  /// Sum of values over `items` at parameter x.
  double group_sum(std::span<const std::size_t> items, double x) const {
    double acc = 0.0;
    for (std::size_t i : items) {
      acc += value(i, x);
    }
    return acc;
  }

  /// Largest y for which the curve is not yet on its top profile.
  double y_top() const { return driver.y_of_x(max_ell()); }

  /// Breakpoints of y -> V(x(y)) inside (1, y_top).
  std::vector<double> y_breaks() const {
    std::vector<double> out;
    for (const auto& b : bundles) {
      out.push_back(driver.y_of_x(b.ell));
    }
    if (driver.shifted()) {
      out.push_back(driver.cut);
    }
    return out;
  }
};

/// E[f(V(x))] under the curve distribution.
///
/// Integrated in u = 1/y, which turns dH(y) into du; the mass 1/y_top above
/// the last kink sits on the constant top profile and is added exactly.
template <class F>
double expect_curve(const CurveDistribution& dist, F&& f) {
  const double y_top = dist.y_top();
  std::vector<double> v(dist.n);
  auto at_y = [&](double y) {
    const double x = dist.driver.x_of_y(y);
    for (std::size_t i = 0; i < dist.n; ++i) {
      v[i] = dist.value(i, x);
    }
    return f(std::span<const double>(v));
  };
  std::vector<double> u_breaks;
  for (double y : dist.y_breaks()) {
    u_breaks.push_back(1.0 / y);
  }
  const double body = quadrature::integrate_split(
      [&](double u) { return at_y(1.0 / u); }, 1.0 / y_top, 1.0, u_breaks);
  // Top profile: evaluated just past the last kink so the driver's gap is skipped.
  const double x_top = std::max(dist.max_ell(), dist.driver.x_of_y(y_top));
  for (std::size_t i = 0; i < dist.n; ++i) {
    v[i] = dist.value(i, x_top);
  }
  return body + f(std::span<const double>(v)) / y_top;
}

/// Draws `count` curve points by inverse-cdf sampling; weights are uniform.
inline DiscreteDistribution sample_curve(const CurveDistribution& dist, std::size_t count,
                                         std::uint64_t seed) {
  if (count == 0) {
    throw InvalidArgument("sample count must be at least 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DiscreteDistribution out;
  out.points.reserve(count);
  out.weights.assign(count, 1.0 / static_cast<double>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const double y = 1.0 / (1.0 - unif(rng));
    out.points.push_back(dist.values_at(dist.driver.x_of_y(y)));
  }
  return out;
}

/// Smallest parameter x with group_sum(items, x) >= p; +inf when p exceeds the
/// group's top value.
inline double group_inverse(const CurveDistribution& dist, std::span<const std::size_t> items,
                            double p) {
  std::vector<double> knots{1.0};
  for (std::size_t i : items) {
    knots.push_back(dist.bundles[dist.bundle_of[i]].ell);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  if (p <= dist.group_sum(items, 1.0)) {
    return 1.0;
  }
  const double top = dist.group_sum(items, knots.back());
  if (p > top) {
    return std::numeric_limits<double>::infinity();
  }
  for (std::size_t k = 1; k < knots.size(); ++k) {
    const double s0 = dist.group_sum(items, knots[k - 1]);
    const double s1 = dist.group_sum(items, knots[k]);
    if (p <= s1) {
      if (s1 <= s0) {
        return knots[k - 1];
      }
      // group_sum is affine on [knots[k-1], knots[k]].
      return knots[k - 1] + (p - s0) * (knots[k] - knots[k - 1]) / (s1 - s0);
    }
  }
  return knots.back();
}

/// P(sum_{j in items} v_j >= p).
inline double group_tail(const CurveDistribution& dist, std::span<const std::size_t> items, double p) {
  if (p <= 0.0) {
    return 1.0;
  }
  const double x = group_inverse(dist, items, p);
  if (!std::isfinite(x)) {
    return 0.0;
  }
  return dist.driver.tail(x);
}

/// Revenue of a posted price p for bundle `bundle` of the curve's partition.
inline double posted_price_revenue(const CurveDistribution& dist, std::size_t bundle, double p) {
  if (!(p > 0.0)) {
    throw InvalidArgument("posted price must be positive");
  }
  if (bundle >= dist.partition.size()) {
    throw InvalidArgument("bundle index out of range");
  }
  return p * group_tail(dist, dist.partition[bundle], p);
}

namespace detail {

/// Integral of min(a (y + d), c) dy / y^2 over [lo, hi], with d constant.
inline double capped_ray_moment(double a, double c, double d, double lo, double hi) {
  if (a <= 0.0) {
    return std::min(0.0, c) * (1.0 / lo - 1.0 / hi);
  }
  const double y_cap = c / a - d;
  auto ray = [&](double l, double h) { return a * (std::log(h / l) + d * (1.0 / l - 1.0 / h)); };
  auto flat = [&](double l, double h) { return c * (1.0 / l - 1.0 / h); };
  if (y_cap <= lo) {
    return flat(lo, hi);
  }
  if (y_cap >= hi) {
    return ray(lo, hi);
  }
  return ray(lo, y_cap) + flat(y_cap, hi);
}

}  // namespace detail

/// Equal-mass quantile discretisation of the curve: `bins` cells of equal
/// H-mass below the top profile, each represented by its conditional mean
/// (so item means are exact), plus the top atom.
inline DiscreteDistribution discretize_curve(const CurveDistribution& dist, std::size_t bins) {
  if (bins == 0) {
    throw InvalidArgument("bin count must be positive");
  }
  const double y_top = dist.y_top();
  std::vector<double> edges;
  edges.reserve(bins + 8);
  const double u_top = 1.0 - 1.0 / y_top;
  for (std::size_t k = 0; k <= bins; ++k) {
    const double u = u_top * static_cast<double>(k) / static_cast<double>(bins);
    edges.push_back(1.0 / (1.0 - u));
  }
  edges.back() = y_top;
  for (double y : dist.y_breaks()) {
    if (y > 1.0 && y < y_top) {
      edges.push_back(y);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  DiscreteDistribution out;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double lo = edges[k];
    const double hi = edges[k + 1];
    const double mass = 1.0 / lo - 1.0 / hi;
    if (!(mass > 0.0)) {
      continue;
    }
    const double shift = dist.driver.shifted() && lo >= dist.driver.cut ? dist.driver.shift : 0.0;
    std::vector<double> point(dist.n);
    for (std::size_t i = 0; i < dist.n; ++i) {
      const CurveBundle& b = dist.bundles[dist.bundle_of[i]];
      const double g = dist.item_shares[i];
      point[i] = detail::capped_ray_moment(g * b.alpha, g * b.beta, shift, lo, hi) / mass;
    }
    out.points.push_back(std::move(point));
    out.weights.push_back(mass);
  }
  out.points.push_back(dist.values_at(std::max(dist.max_ell(), dist.driver.x_of_y(y_top))));
  out.weights.push_back(1.0 / y_top);
  // Absorb floating error so weights form an exact probability vector.
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& w : out.weights) {
    w /= total;
  }
  return out;
}

/// Support curve as CSV: x, v_1..v_n on `samples` points of [1, 1.25 max ell].
inline void write_support_csv(std::ostream& os, const CurveDistribution& dist, std::size_t samples) {
  os << "x";
  for (std::size_t i = 0; i < dist.n; ++i) {
    os << ",v_" << (i + 1);
  }
  os << '\n';
  const double x_hi = 1.25 * dist.max_ell();
  std::vector<double> xs;
  for (std::size_t k = 0; k < samples; ++k) {
    xs.push_back(1.0 + (x_hi - 1.0) * static_cast<double>(k) / static_cast<double>(samples - 1));
  }
  for (const auto& b : dist.bundles) {
    xs.push_back(b.ell);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  char buf[64];
  for (double x : xs) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf;
    for (double v : dist.values_at(x)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace robust_bundling
