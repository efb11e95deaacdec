#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "robust_bundling/errors.hpp"
#include "robust_bundling/saddle_core.hpp"
#include "robust_bundling/simplex.hpp"
#include "robust_bundling/worst_case.hpp"

namespace robust_bundling {

/// splitmix64 step; used to derive independent per-trial seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t root, std::uint64_t trial) {
  std::uint64_t state = root;
  std::uint64_t out = 0;
  for (std::uint64_t k = 0; k <= trial; ++k) {
    out = splitmix64(state);
  }
  return out;
}

/// Point moment constraints of an ambiguity set. Without dispersion rows only
/// the means are pinned (the domain-restricted variant).
struct MomentTargets {
  Partition partition;
  std::vector<double> means;
  std::vector<DispersionFunction> kernels;
  std::vector<double> dispersions;  ///< empty: no dispersion rows

  std::size_t n() const { return means.size(); }
  bool has_dispersion() const { return !dispersions.empty(); }

  static MomentTargets from_solution(const SaddleSolution& sol) {
    return {sol.partition, sol.chosen_m, sol.kernels, sol.chosen_s};
  }

  static MomentTargets from_problem(const AmbiguityProblem& problem) {
    if (!problem.is_point()) {
      throw InvalidArgument("LP feasibility needs point moments");
    }
    MomentTargets t;
    t.partition = problem.partition;
    for (const auto& m : problem.means) {
      t.means.push_back(m.lo);
    }
    for (const auto& d : problem.dispersions) {
      t.kernels.push_back(d.kernel);
      t.dispersions.push_back(d.s.lo);
    }
    return t;
  }

  double bundle_mean(std::size_t k) const {
    double acc = 0.0;
    for (std::size_t i : partition[k]) {
      acc += means[i];
    }
    return acc;
  }

  /// Largest absolute violation of the constraints by `dist`.
  double max_residual(const DiscreteDistribution& dist) const {
    double worst = 0.0;
    double total = 0.0;
    for (double w : dist.weights) {
      total += w;
    }
    worst = std::abs(total - 1.0);
    for (std::size_t i = 0; i < n(); ++i) {
      const double mean = dist.expect([&](std::span<const double> v) { return v[i]; });
      worst = std::max(worst, std::abs(mean - means[i]));
    }
    if (has_dispersion()) {
      for (std::size_t k = 0; k < partition.size(); ++k) {
        const double mk = bundle_mean(k);
        const double s = dist.expect([&](std::span<const double> v) {
          double acc = 0.0;
          for (std::size_t i : partition[k]) {
            acc += v[i];
          }
          return kernels[k](acc - mk);
        });
        worst = std::max(worst, std::abs(s - dispersions[k]));
      }
    }
    return worst;
  }
};

struct Infeasible {
  double phase_one_objective = 0.0;
};

using LpOutcome = std::variant<DiscreteDistribution, Infeasible>;

/// Finds weights on `support` meeting the moment targets with a phase-one
/// simplex. The seed permutes the column order, which selects among vertices.
/// Zero-weight points are dropped from the returned distribution.
inline LpOutcome lp_feasible_distribution(const MomentTargets& targets,
                                          std::span<const std::vector<double>> support,
                                          std::uint64_t seed) {
  const std::size_t n = targets.n();
  const std::size_t rows = 1 + n + (targets.has_dispersion() ? targets.partition.size() : 0);
  if (support.size() < rows) {
    throw InvalidArgument("LP support needs at least n + |K| + 1 points");
  }
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<double>> a(rows, std::vector<double>(support.size(), 0.0));
  std::vector<double> b(rows, 0.0);
  b[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    b[1 + i] = targets.means[i];
  }
  if (targets.has_dispersion()) {
    for (std::size_t k = 0; k < targets.partition.size(); ++k) {
      b[1 + n + k] = targets.dispersions[k];
    }
  }
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& v = support[order[c]];
    if (v.size() != n) {
      throw InvalidArgument("support point has wrong dimension");
    }
    a[0][c] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      a[1 + i][c] = v[i];
    }
    if (targets.has_dispersion()) {
      for (std::size_t k = 0; k < targets.partition.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i : targets.partition[k]) {
          acc += v[i];
        }
        a[1 + n + k][c] = targets.kernels[k](acc - targets.bundle_mean(k));
      }
    }
  }

  const auto res = simplex::phase_one(a, b);
  if (!res.feasible) {
    return Infeasible{res.objective};
  }
  DiscreteDistribution dist;
  double total = 0.0;
  for (std::size_t c = 0; c < order.size(); ++c) {
    if (res.x[c] > 0.0) {
      dist.points.push_back(support[order[c]]);
      dist.weights.push_back(res.x[c]);
      total += res.x[c];
    }
  }
  for (double& w : dist.weights) {
    w /= total;
  }
  if (targets.max_residual(dist) > 1e-9) {
    return Infeasible{res.objective};
  }
  return dist;
}

/// Random support around the worst-case curve for the LP adversary: the mean
/// vector, the bottom and top of the curve, and points whose bundles move
/// independently along their rays with random within-bundle reallocation.
inline std::vector<std::vector<double>> random_support(const CurveDistribution& curve,
                                                       std::span<const double> means, std::size_t count,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> pts;
  pts.emplace_back(means.begin(), means.end());
  pts.push_back(curve.values_at(1.0));
  pts.push_back(curve.values_at(curve.max_ell()));
  while (pts.size() < count) {
    std::vector<double> v(curve.n, 0.0);
    for (std::size_t k = 0; k < curve.partition.size(); ++k) {
      const CurveBundle& b = curve.bundles[k];
      const double y = 1.0 / (1.0 - unif(rng));
      double total = std::min(b.alpha * y, b.beta);
      if (unif(rng) < 0.2) {
        total *= 0.25 + 1.25 * unif(rng);
      }
      std::vector<double> split;
      double split_sum = 0.0;
      for (std::size_t i : curve.partition[k]) {
        split.push_back(curve.item_shares[i] * (0.5 + unif(rng)));
        split_sum += split.back();
      }
      std::size_t j = 0;
      for (std::size_t i : curve.partition[k]) {
        v[i] = total * split[j++] / split_sum;
      }
    }
    pts.push_back(std::move(v));
  }
  return pts;
}

/// Pure-bundling counterexample: mass eps leaves the interior top point
/// beta (m_i / m)_i for the corners beta e_i, with weights (m_i / m) eps. Item
/// means and the distribution of the total value are unchanged.
inline DiscreteDistribution prop3_distribution(const CurveDistribution& curve, double epsilon,
                                               std::size_t bins = 10000) {
  if (curve.partition.size() != 1) {
    throw InvalidArgument("corner transfer needs the coarsest partition");
  }
  if (curve.driver.shifted()) {
    throw InvalidArgument("corner transfer needs the unperturbed curve");
  }
  const CurveBundle& b = curve.bundles.front();
  const double atom = b.alpha / b.beta;
  if (!(epsilon >= 0.0)) {
    throw InvalidArgument("epsilon must be nonnegative");
  }
  if (!(epsilon < atom)) {
    throw EpsilonTooLarge("epsilon must stay below the top-atom mass " + std::to_string(atom));
  }
  DiscreteDistribution dist = discretize_curve(curve, bins);
  dist.weights.back() -= epsilon;
  if (epsilon > 0.0) {
    for (std::size_t i = 0; i < curve.n; ++i) {
      std::vector<double> corner(curve.n, 0.0);
      corner[i] = b.beta;
      dist.points.push_back(std::move(corner));
      dist.weights.push_back(curve.item_shares[i] * epsilon);
    }
  }
  return dist;
}

/// Separate-sales counterexample on the finest partition.
struct Prop2Perturbation {
  double epsilon = 0.0;
  double cut_ell = 0.0;            ///< the chosen l in (max_{i not in I} l_i, max_i l_i)
  std::vector<bool> in_max_set;    ///< items attaining max l_i
  std::vector<double> alpha_eps;
  std::vector<double> ell_eps;
  double max_residual = 0.0;       ///< perturbed moment equations, by quadrature
  double bundling_limit = 0.0;     ///< sum_I alpha_i + sum_{not I} alpha_i l_i / l
  CurveDistribution curve;         ///< perturbed curve driven by H_eps
  DiscreteDistribution discrete;   ///< its quantile discretisation
};

namespace detail {

struct MaxSet {
  std::vector<bool> in_max;
  double ell_hat = 0.0;
  double ell_rest = 0.0;
};

inline MaxSet max_ratio_set(const SaddleSolution& sol) {
  MaxSet out;
  for (const auto& b : sol.bundles) {
    out.ell_hat = std::max(out.ell_hat, b.ell);
  }
  out.ell_rest = 1.0;
  bool any_rest = false;
  for (const auto& b : sol.bundles) {
    const bool top = b.ell >= out.ell_hat * (1.0 - 1e-12);
    out.in_max.push_back(top);
    if (!top) {
      out.ell_rest = std::max(out.ell_rest, b.ell);
      any_rest = true;
    }
  }
  if (!any_rest) {
    throw HypothesisViolated("all ratios beta_i / alpha_i coincide");
  }
  return out;
}

/// (mean, dispersion) of min(alpha x, alpha ell) under the driver.
inline std::array<double, 2> perturbed_moments(double alpha, double ell, double m,
                                               const DispersionFunction& phi, const ParetoDriver& driver) {
  CurveDistribution one;
  one.n = 1;
  one.partition = {{0}};
  one.bundles = {{alpha, alpha * ell, ell}};
  one.item_shares = {1.0};
  one.bundle_of = {0};
  one.driver = driver;
  const double mean = expect_curve(one, [](std::span<const double> v) { return v[0]; });
  const double disp = expect_curve(one, [&](std::span<const double> v) { return phi(v[0] - m); });
  return {mean, disp};
}

}  // namespace detail

inline void check_finest(const SaddleSolution& sol) {
  for (const auto& block : sol.partition) {
    if (block.size() != 1) {
      throw InvalidArgument("construction needs the finest partition");
    }
  }
}

/// Chosen cut l = l_rest + fraction (l_hat - l_rest).
inline double prop2_cut(const SaddleSolution& sol, double fraction = 0.5) {
  const auto set = detail::max_ratio_set(sol);
  return set.ell_rest + fraction * (set.ell_hat - set.ell_rest);
}

/// Moves the Pareto mass above l - eps right by eps and re-solves, for items
/// with maximal beta/alpha, the mean and dispersion equations under the
/// flattened cdf (damped Newton, finite-difference Jacobian).
inline Prop2Perturbation prop2_distribution(const SaddleSolution& sol, double epsilon,
                                            double fraction = 0.5, std::size_t bins = 10000) {
  check_finest(sol);
  const auto set = detail::max_ratio_set(sol);
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidArgument("cut fraction must lie in (0, 1)");
  }
  Prop2Perturbation out;
  out.epsilon = epsilon;
  out.cut_ell = set.ell_rest + fraction * (set.ell_hat - set.ell_rest);
  out.in_max_set = set.in_max;
  if (!(epsilon > 0.0) || !(epsilon < set.ell_hat - out.cut_ell) || !(epsilon < out.cut_ell - set.ell_rest)) {
    throw EpsilonTooLarge("epsilon must lie in (0, min(l_hat - l, l - l_rest))");
  }
  const ParetoDriver driver{out.cut_ell - epsilon, epsilon};

  const std::size_t n = sol.n();
  out.alpha_eps.resize(n);
  out.ell_eps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const BundleSolution& b = sol.bundles[i];
    out.alpha_eps[i] = b.alpha;
    out.ell_eps[i] = b.ell;
    if (!set.in_max[i]) {
      continue;
    }
    const DispersionFunction& phi = sol.kernels[i];
    auto residual = [&](double a, double l) {
      const auto mom = detail::perturbed_moments(a, l, b.m, phi, driver);
      return std::array<double, 2>{mom[0] - b.m, mom[1] - b.s};
    };
    auto norm = [](const std::array<double, 2>& r) { return std::max(std::abs(r[0]), std::abs(r[1])); };

    double a = b.alpha;
    double l = b.ell;
    auto r = residual(a, l);
    int iter = 0;
    while (norm(r) > 1e-13 && iter++ < 100) {
      const double ha = 1e-7 * a;
      const double hl = 1e-7 * l;
      const auto ra_p = residual(a + ha, l);
      const auto ra_m = residual(a - ha, l);
      const auto rl_p = residual(a, l + hl);
      const auto rl_m = residual(a, l - hl);
      const double j00 = (ra_p[0] - ra_m[0]) / (2 * ha);
      const double j10 = (ra_p[1] - ra_m[1]) / (2 * ha);
      const double j01 = (rl_p[0] - rl_m[0]) / (2 * hl);
      const double j11 = (rl_p[1] - rl_m[1]) / (2 * hl);
      const double det = j00 * j11 - j01 * j10;
      if (!(std::abs(det) > 0.0)) {
        throw NewtonDivergence("singular Jacobian in perturbed moment system");
      }
      const double da = -(j11 * r[0] - j01 * r[1]) / det;
      const double dl = -(-j10 * r[0] + j00 * r[1]) / det;
      double step = 1.0;
      bool improved = false;
      for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
        const double a_new = a + step * da;
        const double l_new = l + step * dl;
        if (!(a_new > 0.0) || !(l_new > out.cut_ell)) {
          continue;
        }
        const auto r_new = residual(a_new, l_new);
        if (norm(r_new) < norm(r)) {
          a = a_new;
          l = l_new;
          r = r_new;
          improved = true;
          break;
        }
      }
      if (!improved) {
        break;
      }
    }
    if (!(norm(r) <= 1e-10)) {
      throw NewtonDivergence("perturbed moment system did not converge; retry with smaller epsilon");
    }
    out.alpha_eps[i] = a;
    out.ell_eps[i] = l;
    out.max_residual = std::max(out.max_residual, norm(r));
  }

  out.curve.n = n;
  out.curve.partition = sol.partition;
  out.curve.item_shares.assign(n, 1.0);
  out.curve.bundle_of = block_of(sol.partition, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.curve.bundles.push_back({out.alpha_eps[i], out.alpha_eps[i] * out.ell_eps[i], out.ell_eps[i]});
  }
  out.curve.driver = driver;
  out.discrete = discretize_curve(out.curve, bins);

  for (std::size_t i = 0; i < n; ++i) {
    const BundleSolution& b = sol.bundles[i];
    out.bundling_limit += set.in_max[i] ? b.alpha : b.alpha * b.ell / out.cut_ell;
  }
  return out;
}

/// d alpha_i^eps / d eps at eps = 0 for an item of the max set.
struct Prop2Derivative {
  double implicit = 0.0;  ///< from the Jacobians of the perturbed system
  double printed = 0.0;   ///< ratio with both integrals over [1, l_i] and no alpha factor
};

inline Prop2Derivative prop2_derivative(const BundleSolution& b, const DispersionFunction& phi, double cut_ell) {
  const double top = phi.first(b.alpha * b.ell - b.m);
  auto gap = [&](double x) { return phi.first(b.alpha * x - b.m) - top; };
  const double den = quadrature::integrate([&](double x) { return gap(x) * x / (x * x); }, 1.0, b.ell);
  const double num_full = quadrature::integrate([&](double x) { return gap(x) / (x * x); }, 1.0, b.ell);
  const double num_upper = quadrature::integrate([&](double x) { return gap(x) / (x * x); }, cut_ell, b.ell);
  return {-b.alpha * num_upper / den, -num_full / den};
}

}  // namespace robust_bundling
