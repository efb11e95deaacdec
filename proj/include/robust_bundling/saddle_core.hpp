#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "robust_bundling/dispersion.hpp"
#include "robust_bundling/errors.hpp"
#include "robust_bundling/quadrature.hpp"

namespace robust_bundling {

/// Closed interval [lo, hi]; a point when lo == hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double x) { return {x, x}; }

  bool degenerate() const { return lo == hi; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  double mid() const { return 0.5 * (lo + hi); }
};

/// Disjoint item-index blocks whose union is {0, ..., n-1}.
using Partition = std::vector<std::vector<std::size_t>>;

inline Partition finest_partition(std::size_t n) {
  Partition p(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = {i};
  }
  return p;
}

inline Partition coarsest_partition(std::size_t n) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {all};
}

/// Throws InvalidArgument unless `partition` covers {0..n-1} with disjoint,
/// nonempty blocks.
inline void validate_partition(const Partition& partition, std::size_t n) {
  if (n == 0) {
    throw InvalidArgument("item count must be positive");
  }
  std::vector<int> seen(n, 0);
  for (std::size_t k = 0; k < partition.size(); ++k) {
    if (partition[k].empty()) {
      throw InvalidArgument("partition block " + std::to_string(k) + " is empty");
    }
    for (std::size_t i : partition[k]) {
      if (i >= n) {
        throw InvalidArgument("partition references item " + std::to_string(i) +
                              " outside 0.." + std::to_string(n - 1));
      }
      if (seen[i]++ != 0) {
        throw InvalidArgument("item " + std::to_string(i) + " appears in two blocks");
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] == 0) {
      throw InvalidArgument("item " + std::to_string(i) + " is not covered by the partition");
    }
  }
}

/// Index of the block containing each item.
inline std::vector<std::size_t> block_of(const Partition& partition, std::size_t n) {
  std::vector<std::size_t> out(n, 0);
  for (std::size_t k = 0; k < partition.size(); ++k) {
    for (std::size_t i : partition[k]) {
      out[i] = k;
    }
  }
  return out;
}

struct BundleDispersion {
  DispersionFunction kernel;
  Interval s;
};

/// Moment ambiguity: item means in a box, bundle dispersions in a box.
struct AmbiguityProblem {
  std::size_t n = 0;
  Partition partition;
  std::vector<Interval> means;
  std::vector<BundleDispersion> dispersions;

  void validate() const {
    validate_partition(partition, n);
    if (means.size() != n) {
      throw InvalidArgument("expected " + std::to_string(n) + " mean intervals");
    }
    if (dispersions.size() != partition.size()) {
      throw InvalidArgument("expected one dispersion spec per bundle");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!(means[i].lo > 0.0) || !(means[i].lo <= means[i].hi) || !std::isfinite(means[i].hi)) {
        throw InvalidArgument("means[" + std::to_string(i) + "] must satisfy 0 < lo <= hi");
      }
    }
    for (std::size_t k = 0; k < dispersions.size(); ++k) {
      const Interval& s = dispersions[k].s;
      if (!(s.lo > 0.0) || !(s.lo <= s.hi) || !std::isfinite(s.hi)) {
        throw InvalidArgument("dispersions[" + std::to_string(k) + "] must satisfy 0 < lo <= hi");
      }
    }
  }

  bool is_point() const {
    return std::all_of(means.begin(), means.end(), [](const Interval& x) { return x.degenerate(); }) &&
           std::all_of(dispersions.begin(), dispersions.end(),
                       [](const BundleDispersion& d) { return d.s.degenerate(); });
  }
};

/// Worst-case parameters of one bundle.
struct BundleSolution {
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;  ///< price-density normaliser
  double m = 0.0;       ///< bundle mean
  double s = 0.0;       ///< bundle dispersion
  double ell = 0.0;     ///< beta / alpha
};

struct SaddleSolution {
  Partition partition;
  std::vector<DispersionFunction> kernels;
  std::vector<BundleSolution> bundles;
  std::vector<double> chosen_m;
  std::vector<double> chosen_s;
  double guarantee = 0.0;
  std::vector<double> item_shares;

  std::size_t n() const { return chosen_m.size(); }
};

namespace detail {

/// Largest beta/alpha ratio the solver represents; beyond it the dispersion
/// equation is treated as +infinity (only reachable for s / m^2 > 1e12).
inline constexpr double kMaxLogRatio = 34.5;

/// Left side of the dispersion equation after eliminating beta through the
/// mean equation, integrated in t = ln x.
inline double dispersion_lhs(double alpha, double m, const DispersionFunction& phi) {
  const double log_ell = m / alpha - 1.0;
  if (!(log_ell <= kMaxLogRatio)) {
    return std::numeric_limits<double>::infinity();
  }
  const double ell = std::exp(log_ell);
  const double body = quadrature::integrate(
      [&](double t) { return phi(alpha * std::exp(t) - m) * std::exp(-t); }, 0.0, log_ell);
  return body + phi(alpha * ell - m) / ell;
}

inline double lambda_integral(double alpha, double beta, double m, const DispersionFunction& phi) {
  const double top = phi.first(beta - m);
  return quadrature::integrate([&](double x) { return (top - phi.first(x - m)) / x; }, alpha, beta);
}

}  // namespace detail

/// Residual of the mean equation alpha (1 + ln(beta / alpha)) = m.
inline double mean_residual(const BundleSolution& b) {
  return b.alpha * (1.0 + std::log(b.beta / b.alpha)) - b.m;
}

/// Residual of the dispersion equation, evaluated by quadrature in x.
inline double dispersion_residual(const BundleSolution& b, const DispersionFunction& phi) {
  const double body = quadrature::integrate(
      [&](double x) { return phi(b.alpha * x - b.m) / (x * x); }, 1.0, b.ell);
  return body + phi(b.beta - b.m) * b.alpha / b.beta - b.s;
}

/// Solves the mean and dispersion equations of one bundle for (alpha, beta)
/// and computes lambda.
///
/// beta is eliminated through beta = alpha e^{(m - alpha)/alpha}; the remaining
/// dispersion equation is strictly decreasing in alpha on (0, m), so bisection
/// converges to the unique root.
inline BundleSolution solve_bundle(double m, double s, const DispersionFunction& phi) {
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw InvalidArgument("bundle mean must be positive");
  }
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw InvalidArgument("bundle dispersion must be positive");
  }
  if (s < 1e-9 * m * m) {
    throw DegenerateDispersion("dispersion " + std::to_string(s) + " is below 1e-9 m^2");
  }
  auto excess = [&](double alpha) { return detail::dispersion_lhs(alpha, m, phi) - s; };

  double hi = m * (1.0 - 1e-12);
  if (!(excess(hi) < 0.0)) {
    throw NonConvergence("dispersion equation is not below target near alpha = m");
  }
  double lo = m * 1e-8;
  int expansions = 0;
  while (!(excess(lo) > 0.0)) {
    if (++expansions > 200) {
      throw NonConvergence("could not bracket alpha from below");
    }
    hi = lo;
    lo *= 0.1;
  }

  for (int iter = 0; iter < 400 && hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * hi; ++iter) {
    const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  BundleSolution out;
  out.m = m;
  out.s = s;
  out.alpha = std::abs(excess(lo)) < std::abs(excess(hi)) ? lo : hi;
  out.ell = std::exp(m / out.alpha - 1.0);
  out.beta = out.alpha * out.ell;

  const double tol = 1e-10 * std::max({1.0, m, s});
  if (std::abs(mean_residual(out)) > tol || std::abs(dispersion_residual(out, phi)) > tol) {
    throw NonConvergence("bundle residuals exceed tolerance at m=" + std::to_string(m) +
                         " s=" + std::to_string(s));
  }
  out.lambda = 1.0 / detail::lambda_integral(out.alpha, out.beta, m, phi);
  return out;
}

namespace detail {

/// Golden-section minimiser on [lo, hi]; the endpoints are always candidates,
/// so monotone objectives return an exact endpoint.
inline double golden_argmin(const std::function<double(double)>& f, double lo, double hi,
                            double tol) {
  if (!(hi > lo)) {
    return lo;
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(hi))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  double best = 0.5 * (a + b);
  double f_best = f(best);
  for (double x : {lo, hi}) {
    const double fx = f(x);
    if (fx <= f_best) {
      best = x;
      f_best = fx;
    }
  }
  return best;
}

struct BundleChoice {
  double m = 0.0;
  double s = 0.0;
  double alpha = std::numeric_limits<double>::infinity();
};

/// Minimises alpha(m_K, s_K) over the bundle's box by coordinate descent with
/// golden-section line searches, cross-checked on a 21-point grid per free axis.
inline BundleChoice minimize_bundle(Interval mk, Interval sk, const DispersionFunction& phi) {
  auto alpha_at = [&](double m, double s) { return solve_bundle(m, s, phi).alpha; };
  const bool free_m = !mk.degenerate();
  const bool free_s = !sk.degenerate();

  auto descend = [&](BundleChoice start) {
    BundleChoice cur = start;
    cur.alpha = alpha_at(cur.m, cur.s);
    for (int round = 0; round < 60; ++round) {
      const double before = cur.alpha;
      if (free_m) {
        cur.m = golden_argmin([&](double m) { return alpha_at(m, cur.s); }, mk.lo, mk.hi, 1e-9);
      }
      if (free_s) {
        cur.s = golden_argmin([&](double s) { return alpha_at(cur.m, s); }, sk.lo, sk.hi, 1e-9);
      }
      cur.alpha = alpha_at(cur.m, cur.s);
      if (before - cur.alpha <= 1e-14 * std::max(1.0, before)) {
        break;
      }
    }
    return cur;
  };

  BundleChoice best = descend({mk.mid(), sk.mid(), 0.0});
  if (!free_m && !free_s) {
    return best;
  }

  constexpr int kGrid = 21;
  BundleChoice grid_best;
  const int nm = free_m ? kGrid : 1;
  const int ns = free_s ? kGrid : 1;
  for (int a = 0; a < nm; ++a) {
    const double m = free_m ? mk.lo + (mk.hi - mk.lo) * a / (kGrid - 1) : mk.lo;
    for (int b = 0; b < ns; ++b) {
      const double s = free_s ? sk.lo + (sk.hi - sk.lo) * b / (kGrid - 1) : sk.lo;
      const double al = alpha_at(m, s);
      if (al < grid_best.alpha) {
        grid_best = {m, s, al};
      }
    }
  }
  if (grid_best.alpha < best.alpha) {
    BundleChoice restarted = descend(grid_best);
    best = restarted.alpha <= grid_best.alpha ? restarted : grid_best;
  }
  return best;
}

}  // namespace detail

/// Minimises sum_K alpha_K over the box of means and dispersions and returns
/// the worst-case parameters at the minimiser.
///
/// alpha_K depends on the means only through m_K, so the search runs per
/// bundle over (m_K, s_K); item means are then placed at the same relative
/// position inside their own intervals.
inline SaddleSolution minimize_guarantee(const AmbiguityProblem& problem) {
  problem.validate();
  SaddleSolution out;
  out.partition = problem.partition;
  out.chosen_m.assign(problem.n, 0.0);
  out.chosen_s.assign(problem.partition.size(), 0.0);
  out.item_shares.assign(problem.n, 0.0);

  for (std::size_t k = 0; k < problem.partition.size(); ++k) {
    const auto& block = problem.partition[k];
    const DispersionFunction& phi = problem.dispersions[k].kernel;
    Interval mk{0.0, 0.0};
    for (std::size_t i : block) {
      mk.lo += problem.means[i].lo;
      mk.hi += problem.means[i].hi;
    }
    const bool all_point = std::all_of(block.begin(), block.end(),
                                       [&](std::size_t i) { return problem.means[i].degenerate(); });
    if (all_point) {
      mk.hi = mk.lo;
    }

    const detail::BundleChoice choice = detail::minimize_bundle(mk, problem.dispersions[k].s, phi);
    const double t = mk.degenerate() ? 0.0 : (choice.m - mk.lo) / (mk.hi - mk.lo);
    double placed = 0.0;
    for (std::size_t i : block) {
      const Interval& iv = problem.means[i];
      out.chosen_m[i] = iv.degenerate() ? iv.lo : std::clamp(iv.lo + t * (iv.hi - iv.lo), iv.lo, iv.hi);
      placed += out.chosen_m[i];
    }
    out.chosen_s[k] = choice.s;
    out.kernels.push_back(phi);
    out.bundles.push_back(solve_bundle(placed, choice.s, phi));
    for (std::size_t i : block) {
      out.item_shares[i] = out.chosen_m[i] / placed;
    }
  }
  out.guarantee = 0.0;
  for (const auto& b : out.bundles) {
    out.guarantee += b.alpha;
  }
  return out;
}

/// Finite-difference derivatives of alpha next to the closed-form candidates.
struct SensitivityReport {
  double fd_dalpha_dm = 0.0;
  double formula_dalpha_dm = 0.0;
  bool dm_agree = false;

  double fd_dalpha_ds = 0.0;
  double formula_dalpha_ds = 0.0;  ///< printed candidate: +lambda
  bool ds_agree = false;           ///< signed agreement with the printed candidate
  bool ds_magnitude_agree = false; ///< |fd| vs |lambda|
  bool ds_sign_agree = false;
};

/// Relative agreement test used by the sensitivity report.
inline bool relative_agree(double truth, double candidate, double rel_tol = 1e-3) {
  return std::abs(truth - candidate) <= rel_tol * std::max(std::abs(truth), 1e-300);
}

inline SensitivityReport sensitivity_check(const BundleSolution& sol, const DispersionFunction& phi) {
  SensitivityReport r;
  const double hm = 1e-5 * sol.m;
  const double hs = 1e-5 * sol.s;
  r.fd_dalpha_dm = (solve_bundle(sol.m + hm, sol.s, phi).alpha -
                    solve_bundle(sol.m - hm, sol.s, phi).alpha) / (2.0 * hm);
  r.fd_dalpha_ds = (solve_bundle(sol.m, sol.s + hs, phi).alpha -
                    solve_bundle(sol.m, sol.s - hs, phi).alpha) / (2.0 * hs);

  const double top = phi.first(sol.beta - sol.m);
  const double weighted = quadrature::integrate(
      [&](double x) { return (top - phi.first(x - sol.m)) / (x * x); }, sol.alpha, sol.beta);
  r.formula_dalpha_dm = sol.lambda * sol.alpha * weighted;
  r.formula_dalpha_ds = sol.lambda;

  r.dm_agree = relative_agree(r.fd_dalpha_dm, r.formula_dalpha_dm);
  r.ds_agree = relative_agree(r.fd_dalpha_ds, r.formula_dalpha_ds);
  r.ds_magnitude_agree = relative_agree(std::abs(r.fd_dalpha_ds), std::abs(r.formula_dalpha_ds));
  r.ds_sign_agree = std::signbit(r.fd_dalpha_ds) == std::signbit(r.formula_dalpha_ds);
  return r;
}

}  // namespace robust_bundling
