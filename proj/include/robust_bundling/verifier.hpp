#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robust_bundling/adversary.hpp"
#include "robust_bundling/errors.hpp"
#include "robust_bundling/mechanism.hpp"
#include "robust_bundling/quadrature.hpp"
#include "robust_bundling/saddle_core.hpp"
#include "robust_bundling/worst_case.hpp"

namespace robust_bundling {

// ---------------------------------------------------------------------------
// Virtual values and the envelope bound

struct VirtualValueProfile {
  std::vector<double> x;
  std::vector<std::vector<double>> J;  ///< J[i][k] at x[k]
};

/// J_i(x) = V_i(x) - V_i'(x) x on the curve (inverse hazard rate of H is x).
inline double virtual_value(const CurveDistribution& dist, std::size_t i, double x) {
  const CurveBundle& b = dist.bundles[dist.bundle_of[i]];
  const double slope = x < b.ell ? dist.item_shares[i] * b.alpha : 0.0;
  return dist.value(i, x) - slope * x;
}

/// Virtual values on `samples` points of [1, 1.25 max ell], kinks excluded.
inline VirtualValueProfile virtual_values(const CurveDistribution& dist, std::size_t samples = 1000) {
  VirtualValueProfile out;
  const double hi = 1.25 * dist.max_ell();
  for (std::size_t k = 0; k < samples; ++k) {
    const double x = 1.0 + (hi - 1.0) * static_cast<double>(k) / static_cast<double>(samples - 1);
    const bool at_kink = std::any_of(dist.bundles.begin(), dist.bundles.end(),
                                     [&](const CurveBundle& b) { return std::abs(x - b.ell) < 1e-12; });
    if (!at_kink) {
      out.x.push_back(x);
    }
  }
  out.J.assign(dist.n, {});
  for (std::size_t i = 0; i < dist.n; ++i) {
    for (double x : out.x) {
      out.J[i].push_back(virtual_value(dist, i, x));
    }
  }
  return out;
}

/// sup over allocations psi in [0,1]^n of E_H[psi . J]: pointwise psi_i = 1{J_i > 0}.
inline double seller_bound_under_fstar(const CurveDistribution& dist) {
  if (dist.driver.shifted()) {
    throw InvalidArgument("envelope bound is defined for the unperturbed curve");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < dist.n; ++i) {
    const double ell = dist.bundles[dist.bundle_of[i]].ell;
    // u = 1/x maps dH(x) to du on (0, 1].
    total += quadrature::integrate_split(
        [&](double u) { return std::max(0.0, virtual_value(dist, i, 1.0 / u)); }, 0.0, 1.0,
        std::vector<double>{1.0 / ell});
  }
  return total;
}

// ---------------------------------------------------------------------------
// Distribution of a group's total value

/// P(W >= p) for W the sum of a group's values, with the prices at which the
/// tail or the revenue curve changes shape.
struct ValueTail {
  std::function<double(double)> tail;
  std::vector<double> breaks;
  double top = 0.0;
};

inline ValueTail group_value_tail(const CurveDistribution& dist, std::vector<std::size_t> items) {
  ValueTail out;
  std::vector<double> xs{1.0};
  for (std::size_t i : items) {
    xs.push_back(dist.bundles[dist.bundle_of[i]].ell);
  }
  if (dist.driver.shifted()) {
    xs.push_back(dist.driver.cut);
    xs.push_back(dist.driver.cut + dist.driver.shift);
  }
  for (double x : xs) {
    out.breaks.push_back(dist.group_sum(items, std::min(x, dist.max_ell())));
  }
  out.top = dist.group_sum(items, dist.max_ell());
  out.tail = [&dist, items = std::move(items)](double p) { return group_tail(dist, items, p); };
  return out;
}

inline ValueTail group_value_tail(const DiscreteDistribution& dist, const std::vector<std::size_t>& items) {
  std::vector<std::pair<double, double>> totals;
  totals.reserve(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) {
    double w = 0.0;
    for (std::size_t i : items) {
      w += dist.points[k][i];
    }
    totals.emplace_back(w, dist.weights[k]);
  }
  std::sort(totals.begin(), totals.end());
  auto values = std::make_shared<std::vector<double>>();
  auto suffix = std::make_shared<std::vector<double>>(totals.size() + 1, 0.0);
  for (const auto& t : totals) {
    values->push_back(t.first);
  }
  for (std::size_t k = totals.size(); k-- > 0;) {
    (*suffix)[k] = (*suffix)[k + 1] + totals[k].second;
  }
  ValueTail out;
  out.breaks = *values;
  out.breaks.erase(std::unique(out.breaks.begin(), out.breaks.end()), out.breaks.end());
  out.top = values->empty() ? 0.0 : values->back();
  out.tail = [values, suffix](double p) {
    const auto it = std::lower_bound(values->begin(), values->end(), p);
    return std::min(1.0, (*suffix)[static_cast<std::size_t>(it - values->begin())]);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Seller-side sweeps

enum class SellerFamily { DeterministicBundlePrices, DeterministicItemPrices, RandomizedGridMenus };

inline const char* family_name(SellerFamily f) {
  switch (f) {
    case SellerFamily::DeterministicBundlePrices:
      return "deterministic_bundle_prices";
    case SellerFamily::DeterministicItemPrices:
      return "deterministic_item_prices";
    case SellerFamily::RandomizedGridMenus:
      return "randomized_grid_menus";
  }
  return "unknown";
}

struct SweepOptions {
  Partition grouping;         ///< pricing groups; empty means the grand bundle
  double price_step = 1e-3;
  double range_factor = 1.2;  ///< prices up to range_factor * largest total value
  std::size_t menu_grid = 40;
  std::vector<double> menu_probabilities{0.25, 0.5, 0.75};
};

/// Best response inside one family. For menus, `probabilities` and
/// `second_prices` hold the lottery option (q, q p1) and the sure price p2.
struct SweepResult {
  SellerFamily family{};
  double value = 0.0;
  std::vector<double> prices;
  std::vector<double> probabilities;
  std::vector<double> second_prices;
};

struct PostedPrice {
  double value = 0.0;
  double price = 0.0;
};

/// Best posted price for a total with tail `t`; ties go to the smallest price.
inline PostedPrice best_posted_price(const ValueTail& t, double step = 1e-3, double range_factor = 1.2) {
  std::vector<double> prices;
  const double hi = range_factor * t.top;
  const auto count = static_cast<std::size_t>(std::floor(hi / step));
  for (std::size_t k = 1; k <= count; ++k) {
    prices.push_back(step * static_cast<double>(k));
  }
  for (double b : t.breaks) {
    if (b > 0.0) {
      prices.push_back(b);
    }
  }
  std::sort(prices.begin(), prices.end());
  prices.erase(std::unique(prices.begin(), prices.end()), prices.end());
  std::vector<double> rev(prices.size());
  double best = 0.0;
  for (std::size_t k = 0; k < prices.size(); ++k) {
    rev[k] = prices[k] * t.tail(prices[k]);
    best = std::max(best, rev[k]);
  }
  PostedPrice out{best, 0.0};
  for (std::size_t k = 0; k < prices.size(); ++k) {
    if (rev[k] >= best * (1.0 - 1e-12)) {
      out.price = prices[k];
      break;
    }
  }
  return out;
}

/// Revenue of the menu {(0,0), (q, q p1), (1, p2)} for a buyer total W.
inline double menu_revenue(const ValueTail& t, double q, double p1, double p2) {
  if (p2 <= p1) {
    return p2 * t.tail(p2);
  }
  const double w12 = (p2 - q * p1) / (1.0 - q);
  return q * p1 * (t.tail(p1) - t.tail(w12)) + p2 * t.tail(w12);
}

struct MenuChoice {
  double value = 0.0;
  double q = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
};

inline MenuChoice best_grid_menu(const ValueTail& t, const SweepOptions& opt) {
  MenuChoice best;
  const double hi = opt.range_factor * t.top;
  for (double q : opt.menu_probabilities) {
    for (std::size_t a = 1; a <= opt.menu_grid; ++a) {
      const double p1 = hi * static_cast<double>(a) / static_cast<double>(opt.menu_grid);
      for (std::size_t b = 1; b <= opt.menu_grid; ++b) {
        const double p2 = hi * static_cast<double>(b) / static_cast<double>(opt.menu_grid);
        const double r = menu_revenue(t, q, p1, p2);
        if (r > best.value) {
          best = {r, q, p1, p2};
        }
      }
    }
  }
  return best;
}

namespace detail {

template <class Dist>
SweepResult sweep(const Dist& dist, std::size_t n, SellerFamily family, const SweepOptions& opt) {
  Partition groups = opt.grouping.empty() ? coarsest_partition(n) : opt.grouping;
  if (family == SellerFamily::DeterministicItemPrices) {
    groups = finest_partition(n);
  }
  validate_partition(groups, n);
  SweepResult out;
  out.family = family;
  for (const auto& group : groups) {
    const ValueTail t = group_value_tail(dist, group);
    if (family == SellerFamily::RandomizedGridMenus) {
      const MenuChoice c = best_grid_menu(t, opt);
      out.value += c.value;
      out.prices.push_back(c.p1);
      out.probabilities.push_back(c.q);
      out.second_prices.push_back(c.p2);
    } else {
      const PostedPrice p = best_posted_price(t, opt.price_step, opt.range_factor);
      out.value += p.value;
      out.prices.push_back(p.price);
    }
  }
  return out;
}

}  // namespace detail

inline SweepResult seller_menu_sweep(const CurveDistribution& dist, SellerFamily family,
                                     const SweepOptions& opt = {}) {
  return detail::sweep(dist, dist.n, family, opt);
}

inline SweepResult seller_menu_sweep(const DiscreteDistribution& dist, SellerFamily family,
                                     const SweepOptions& opt = {}) {
  return detail::sweep(dist, dist.dim(), family, opt);
}

// ---------------------------------------------------------------------------
// Counterexample checks

struct Prop3Outcome {
  double epsilon = 0.0;
  double alpha = 0.0;
  double best_separate = 0.0;
  double gap = 0.0;               ///< alpha - best separate-sales revenue
  double mechanism_revenue = 0.0; ///< revenue of the bundled random price
  double mean_residual = 0.0;
  double dispersion_residual = 0.0;
  DiscreteDistribution distribution;
};

/// Corner transfer on a coarsest-partition solution, scored against the best
/// separate-sales revenue (item-wise posted prices are optimal item by item).
inline Prop3Outcome prop3_check(const SaddleSolution& sol, double epsilon, std::size_t bins = 10000) {
  if (sol.partition.size() != 1) {
    throw InvalidArgument("corner transfer needs the coarsest partition");
  }
  const CurveDistribution curve = CurveDistribution::from_solution(sol);
  const DirectMechanism mech(build_menu(sol));
  Prop3Outcome out;
  out.epsilon = epsilon;
  out.alpha = sol.bundles.front().alpha;
  out.distribution = prop3_distribution(curve, epsilon, bins);
  out.best_separate = seller_menu_sweep(out.distribution, SellerFamily::DeterministicItemPrices).value;
  out.gap = out.alpha - out.best_separate;
  out.mechanism_revenue = revenue(mech, out.distribution);
  const MomentTargets targets = MomentTargets::from_solution(sol);
  for (std::size_t i = 0; i < sol.n(); ++i) {
    const double mean = out.distribution.expect([&](std::span<const double> v) { return v[i]; });
    out.mean_residual = std::max(out.mean_residual, std::abs(mean - sol.chosen_m[i]));
  }
  const double m = targets.bundle_mean(0);
  const double disp = out.distribution.expect([&](std::span<const double> v) {
    double w = 0.0;
    for (double x : v) {
      w += x;
    }
    return sol.kernels[0](w - m);
  });
  out.dispersion_residual = std::abs(disp - sol.chosen_s[0]);
  return out;
}

struct Prop2Outcome {
  bool found = false;
  double epsilon = 0.0;
  double guarantee = 0.0;
  double best_bundling = 0.0;
  double gap = 0.0;              ///< guarantee - best pure-bundling revenue
  double bundling_limit = 0.0;
  double moment_residual = 0.0;
  std::vector<double> tried;
  std::optional<Prop2Perturbation> perturbation;
};

/// Largest deviation of the perturbed curve's item means and dispersions.
inline double perturbed_moment_residual(const SaddleSolution& sol, const CurveDistribution& curve) {
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.n(); ++i) {
    const double mean = expect_curve(curve, [&](std::span<const double> v) { return v[i]; });
    const double disp = expect_curve(curve, [&](std::span<const double> v) {
      return sol.kernels[i](v[i] - sol.chosen_m[i]);
    });
    worst = std::max({worst, std::abs(mean - sol.chosen_m[i]), std::abs(disp - sol.chosen_s[i])});
  }
  return worst;
}

/// Walks down `epsilons` until the best pure-bundling revenue under the
/// flattened perturbation falls more than `min_gap` below the guarantee.
inline Prop2Outcome prop2_search(const SaddleSolution& sol, std::vector<double> epsilons = {1e-2, 1e-3, 1e-4, 1e-5},
                                 double fraction = 0.5, double min_gap = 1e-6) {
  check_finest(sol);
  Prop2Outcome out;
  out.guarantee = sol.guarantee;
  for (double eps : epsilons) {
    out.tried.push_back(eps);
    Prop2Perturbation p;
    try {
      p = prop2_distribution(sol, eps, fraction, 64);
    } catch (const EpsilonTooLarge&) {
      continue;
    } catch (const NewtonDivergence&) {
      continue;
    }
    const double best = seller_menu_sweep(p.curve, SellerFamily::DeterministicBundlePrices).value;
    const double residual = perturbed_moment_residual(sol, p.curve);
    out.epsilon = eps;
    out.best_bundling = best;
    out.gap = sol.guarantee - best;
    out.bundling_limit = p.bundling_limit;
    out.moment_residual = residual;
    out.perturbation = std::move(p);
    if (out.gap > min_gap && residual <= 1e-8) {
      out.found = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nature-side sweep

struct NatureOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t support_size = 30;
  bool structured = true;
  std::size_t bins = 10000;
};

struct NatureResult {
  std::optional<double> min_revenue;
  std::string worst_source;
  std::size_t lp_feasible = 0;
  std::size_t lp_infeasible = 0;
  double max_lp_residual = 0.0;
  std::vector<std::pair<std::string, double>> structured;

  void record(const std::string& source, double value) {
    if (!min_revenue || value < *min_revenue) {
      min_revenue = value;
      worst_source = source;
    }
  }
};

using SupportFilter = std::function<bool(std::span<const double>)>;

/// Revenue of `mech` on LP-feasible distributions over random supports.
inline void lp_trials(NatureResult& out, const DirectMechanism& mech, const CurveDistribution& curve,
                      const MomentTargets& targets, const NatureOptions& opt, const SupportFilter& keep = {}) {
  for (std::size_t t = 0; t < opt.trials; ++t) {
    const std::uint64_t s = trial_seed(opt.seed, t);
    auto raw = random_support(curve, targets.means, keep ? 4 * opt.support_size : opt.support_size, s);
    std::vector<std::vector<double>> support;
    for (auto& v : raw) {
      if (support.size() == opt.support_size) {
        break;
      }
      if (!keep || keep(v)) {
        support.push_back(std::move(v));
      }
    }
    const LpOutcome res = lp_feasible_distribution(targets, support, s ^ 0x5bd1e995ULL);
    if (const auto* dist = std::get_if<DiscreteDistribution>(&res)) {
      ++out.lp_feasible;
      out.max_lp_residual = std::max(out.max_lp_residual, targets.max_residual(*dist));
      out.record("lp_trial_" + std::to_string(t), revenue(mech, *dist));
    } else {
      ++out.lp_infeasible;
    }
  }
}

/// Minimum revenue of M* over LP trials, the worst case itself and, where the
/// partition allows, the two structured perturbations.
inline NatureResult nature_sweep(const DirectMechanism& mech, const SaddleSolution& sol, const NatureOptions& opt = {}) {
  NatureResult out;
  const CurveDistribution curve = CurveDistribution::from_solution(sol);
  lp_trials(out, mech, curve, MomentTargets::from_solution(sol), opt);
  if (!opt.structured) {
    return out;
  }
  auto add = [&](const std::string& name, double value) {
    out.structured.emplace_back(name, value);
    out.record(name, value);
  };
  add("worst_case_curve", revenue(mech, curve));
  if (sol.partition.size() == 1 && sol.n() >= 2) {
    const BundleSolution& b = sol.bundles.front();
    const double eps = std::min(0.01, 0.5 * b.alpha / b.beta);
    add("corner_transfer", revenue(mech, prop3_distribution(curve, eps, opt.bins)));
  }
  const bool finest = std::all_of(sol.partition.begin(), sol.partition.end(),
                                  [](const auto& block) { return block.size() == 1; });
  if (finest && sol.n() >= 2) {
    for (double eps : {1e-3, 1e-4}) {
      try {
        const Prop2Perturbation p = prop2_distribution(sol, eps, 0.5, 64);
        add("flattened_tail", revenue(mech, p.curve));
        break;
      } catch (const Error&) {
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Saddle report

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct SaddleReport {
  double guarantee = 0.0;
  double seller_best_deviation_value = 0.0;
  std::optional<double> nature_worst_value_found;
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }

  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) {
        return &c;
      }
    }
    return nullptr;
  }

  std::vector<std::string> failed() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.passed) {
        out.push_back(c.name);
      }
    }
    return out;
  }

  /// Records `value <= threshold`.
  void at_most(std::string name, double value, double threshold, std::string detail = {}) {
    checks.push_back({std::move(name), value <= threshold, value, threshold, std::move(detail)});
  }
};

struct CertifyOptions {
  NatureOptions nature;
  SweepOptions sweep;
  const AmbiguityProblem* problem = nullptr;  ///< enables box feasibility and grid optimality
};

namespace detail {

inline void seller_checks(SaddleReport& report, const CurveDistribution& curve, const Partition& own,
                          const SweepOptions& base) {
  SweepOptions grand = base;
  grand.grouping = {};
  SweepOptions own_groups = base;
  own_groups.grouping = own;
  const double tol = 1e-8;
  const std::pair<const char*, SweepResult> sweeps[] = {
      {"seller_grand_bundle_prices", seller_menu_sweep(curve, SellerFamily::DeterministicBundlePrices, grand)},
      {"seller_partition_bundle_prices",
       seller_menu_sweep(curve, SellerFamily::DeterministicBundlePrices, own_groups)},
      {"seller_item_prices", seller_menu_sweep(curve, SellerFamily::DeterministicItemPrices, base)},
      {"seller_randomized_menus", seller_menu_sweep(curve, SellerFamily::RandomizedGridMenus, grand)},
  };
  for (const auto& [name, res] : sweeps) {
    report.seller_best_deviation_value = std::max(report.seller_best_deviation_value, res.value);
    report.at_most(name, res.value - report.guarantee, tol, "best value minus guarantee");
  }
  const double bound = seller_bound_under_fstar(curve);
  report.seller_best_deviation_value = std::max(report.seller_best_deviation_value, bound);
  report.at_most("envelope_bound", std::abs(bound - report.guarantee), 1e-9, "|virtual-value bound - guarantee|");
}

inline void flatness_check(SaddleReport& report, const CurveDistribution& curve) {
  double worst = 0.0;
  bool outside_below = true;
  for (std::size_t k = 0; k < curve.partition.size(); ++k) {
    const CurveBundle& b = curve.bundles[k];
    for (int j = 0; j < 10; ++j) {
      const double p = b.alpha + (b.beta - b.alpha) * j / 10.0;
      worst = std::max(worst, std::abs(posted_price_revenue(curve, k, p) - b.alpha));
    }
    for (double p : {0.5 * b.alpha, 0.99 * b.alpha, 1.01 * b.beta}) {
      outside_below = outside_below && posted_price_revenue(curve, k, p) < b.alpha;
    }
  }
  report.checks.push_back({"posted_price_flatness", worst <= 1e-10 && outside_below, worst, 1e-10,
                           outside_below ? "" : "revenue outside [alpha, beta) reached alpha"});
}

inline void nature_check(SaddleReport& report, const NatureResult& nat) {
  report.nature_worst_value_found = nat.min_revenue;
  const double shortfall = nat.min_revenue ? report.guarantee - *nat.min_revenue : 0.0;
  report.at_most("nature_sweep", shortfall, 1e-6,
                 "guarantee minus worst revenue; lp feasible " + std::to_string(nat.lp_feasible) + ", infeasible " +
                     std::to_string(nat.lp_infeasible) + (nat.worst_source.empty() ? "" : ", worst " + nat.worst_source));
  report.at_most("nature_lp_residual", nat.max_lp_residual, 1e-9, "moment residual of LP distributions");
}

}  // namespace detail

/// Grid minimum of sum alpha over the problem's boxes (21 nodes per free axis, per bundle).
inline double grid_guarantee(const AmbiguityProblem& problem) {
  double total = 0.0;
  for (std::size_t k = 0; k < problem.partition.size(); ++k) {
    Interval mk{0.0, 0.0};
    for (std::size_t i : problem.partition[k]) {
      mk.lo += problem.means[i].lo;
      mk.hi += problem.means[i].hi;
    }
    const Interval sk = problem.dispersions[k].s;
    const int nm = mk.degenerate() ? 1 : 21;
    const int ns = sk.degenerate() ? 1 : 21;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < nm; ++a) {
      const double m = nm == 1 ? mk.lo : mk.lo + (mk.hi - mk.lo) * a / 20.0;
      for (int b = 0; b < ns; ++b) {
        const double s = ns == 1 ? sk.lo : sk.lo + (sk.hi - sk.lo) * b / 20.0;
        best = std::min(best, solve_bundle(m, s, problem.dispersions[k].kernel).alpha);
      }
    }
    total += best;
  }
  return total;
}

/// Full saddle certificate of a moment-problem solution.
inline SaddleReport certify(const SaddleSolution& sol, const CertifyOptions& opt = {}) {
  SaddleReport report;
  report.guarantee = 0.0;
  for (const auto& b : sol.bundles) {
    report.guarantee += b.alpha;
  }
  report.at_most("guarantee_sum", std::abs(report.guarantee - sol.guarantee), 1e-12, "|sum alpha - guarantee|");

  double consistency = 0.0;
  double eq_residual = 0.0;
  double lambda_dev = 0.0;
  for (std::size_t k = 0; k < sol.bundles.size(); ++k) {
    const BundleSolution& b = sol.bundles[k];
    double mk = 0.0;
    for (std::size_t i : sol.partition[k]) {
      mk += sol.chosen_m[i];
    }
    consistency = std::max({consistency, std::abs(mk - b.m), std::abs(sol.chosen_s[k] - b.s),
                            std::abs(b.ell - b.beta / b.alpha) / b.ell});
    const double scale = std::max({1.0, b.m, b.s});
    eq_residual = std::max({eq_residual, std::abs(mean_residual(b)) / scale,
                            std::abs(dispersion_residual(b, sol.kernels[k])) / scale});
    const double lam = 1.0 / detail::lambda_integral(b.alpha, b.beta, b.m, sol.kernels[k]);
    lambda_dev = std::max(lambda_dev, std::abs(lam - b.lambda) / lam);
  }
  report.at_most("bundle_consistency", consistency, 1e-12, "bundle moments versus chosen item moments");
  report.at_most("equation_residuals", eq_residual, 1e-10, "scaled residuals of the bundle equations");

  const RandomPriceMenu menu = build_menu(sol);
  report.at_most("lambda_consistency", std::max(lambda_dev, menu.max_lambda_deviation()), 1e-8,
                 "relative gap between stored, quadrature and closed-form lambda");

  const CurveDistribution curve = CurveDistribution::from_solution(sol);
  double moment = 0.0;
  for (std::size_t i = 0; i < sol.n(); ++i) {
    const double mean = expect_curve(curve, [&](std::span<const double> v) { return v[i]; });
    moment = std::max(moment, std::abs(mean - sol.chosen_m[i]));
  }
  for (std::size_t k = 0; k < sol.bundles.size(); ++k) {
    const auto& block = sol.partition[k];
    double mk = 0.0;
    for (std::size_t i : block) {
      mk += sol.chosen_m[i];
    }
    const double disp = expect_curve(curve, [&](std::span<const double> v) {
      double w = 0.0;
      for (std::size_t i : block) {
        w += v[i];
      }
      return sol.kernels[k](w - mk);
    });
    moment = std::max(moment, std::abs(disp - sol.chosen_s[k]));
  }
  report.at_most("moment_residual", moment, 1e-8, "worst-case curve versus chosen means and dispersions");

  const DirectMechanism mech(menu);
  report.at_most("revenue_identity", std::abs(revenue(mech, curve) - report.guarantee), 1e-8,
                 "|R(M*, F*) - sum alpha|");

  detail::flatness_check(report, curve);
  detail::seller_checks(report, curve, sol.partition, opt.sweep);
  detail::nature_check(report, nature_sweep(mech, sol, opt.nature));

  if (opt.problem != nullptr) {
    const AmbiguityProblem& p = *opt.problem;
    bool inside = p.n == sol.n() && p.partition == sol.partition;
    for (std::size_t i = 0; inside && i < p.n; ++i) {
      inside = p.means[i].contains(sol.chosen_m[i]);
    }
    for (std::size_t k = 0; inside && k < p.partition.size(); ++k) {
      inside = p.dispersions[k].s.contains(sol.chosen_s[k]) && p.dispersions[k].kernel == sol.kernels[k];
    }
    report.checks.push_back({"guarantee_feasibility", inside, inside ? 0.0 : 1.0, 0.0,
                             "chosen moments inside the ambiguity boxes"});
    report.at_most("guarantee_optimality", report.guarantee - grid_guarantee(p), 1e-6,
                   "guarantee minus dense-grid minimum");
  }
  return report;
}

}  // namespace robust_bundling
