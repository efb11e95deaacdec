#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "robust_bundling/adversary.hpp"
#include "robust_bundling/errors.hpp"
#include "robust_bundling/mechanism.hpp"
#include "robust_bundling/saddle_core.hpp"
#include "robust_bundling/verifier.hpp"
#include "robust_bundling/worst_case.hpp"

namespace robust_bundling {

/// Known item means and an upper bound on each bundle's total value.
struct DomainProblem {
  Partition partition;
  std::vector<double> means;
  std::vector<double> caps;

  std::size_t n() const { return means.size(); }

  double bundle_mean(std::size_t k) const {
    double acc = 0.0;
    for (std::size_t i : partition[k]) {
      acc += means[i];
    }
    return acc;
  }

  void validate() const {
    validate_partition(partition, n());
    if (caps.size() != partition.size()) {
      throw InvalidArgument("expected one cap per bundle");
    }
    for (std::size_t i = 0; i < n(); ++i) {
      if (!(means[i] > 0.0) || !std::isfinite(means[i])) {
        throw InvalidArgument("means[" + std::to_string(i) + "] must be positive");
      }
    }
    for (std::size_t k = 0; k < caps.size(); ++k) {
      if (!(caps[k] > bundle_mean(k)) || !std::isfinite(caps[k])) {
        throw InvalidArgument("caps[" + std::to_string(k) + "] must exceed the bundle mean");
      }
    }
  }
};

struct DomainSolution {
  DomainProblem problem;
  std::vector<double> alphas;
  double guarantee = 0.0;
  std::vector<double> item_shares;

  CurveDistribution curve() const {
    CurveDistribution d;
    d.n = problem.n();
    d.partition = problem.partition;
    d.item_shares = item_shares;
    d.bundle_of = block_of(problem.partition, d.n);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      d.bundles.push_back({alphas[k], problem.caps[k], problem.caps[k] / alphas[k]});
    }
    return d;
  }

  RandomPriceMenu menu() const {
    std::vector<BundlePrice> prices;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      BundlePrice p;
      p.mode = BundlePrice::Mode::Domain;
      p.alpha = alphas[k];
      p.beta = problem.caps[k];
      p.m = problem.bundle_mean(k);
      p.lambda = 1.0 / std::log(p.beta / p.alpha);
      prices.push_back(p);
    }
    return RandomPriceMenu(problem.n(), problem.partition, std::move(prices));
  }
};

/// Root of alpha (1 + ln(cap / alpha)) = m on (0, m); the map increases in alpha.
inline double solve_domain_alpha(double m, double cap) {
  if (!(m > 0.0) || !(cap > m)) {
    throw InvalidArgument("domain bundle needs 0 < m < cap");
  }
  double lo = 0.0;
  double hi = m;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * m; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid * (1.0 + std::log(cap / mid)) < m) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline DomainSolution solve_domain(const DomainProblem& problem) {
  problem.validate();
  DomainSolution out;
  out.problem = problem;
  out.item_shares.assign(problem.n(), 0.0);
  for (std::size_t k = 0; k < problem.partition.size(); ++k) {
    const double mk = problem.bundle_mean(k);
    out.alphas.push_back(solve_domain_alpha(mk, problem.caps[k]));
    out.guarantee += out.alphas.back();
    for (std::size_t i : problem.partition[k]) {
      out.item_shares[i] = problem.means[i] / mk;
    }
  }
  return out;
}

/// True when every bundle total of `v` stays within its cap.
inline bool within_caps(const DomainProblem& problem, std::span<const double> v) {
  for (std::size_t k = 0; k < problem.partition.size(); ++k) {
    double w = 0.0;
    for (std::size_t i : problem.partition[k]) {
      w += v[i];
    }
    if (w > problem.caps[k]) {
      return false;
    }
  }
  return true;
}

inline std::vector<std::vector<double>> filter_to_caps(const DomainProblem& problem,
                                                       std::vector<std::vector<double>> support) {
  std::erase_if(support, [&](const std::vector<double>& v) { return !within_caps(problem, v); });
  return support;
}

/// Saddle certificate of the capped-domain solution: the moment pipeline with
/// the cap in place of beta, a log price density and mean-only LP adversaries.
inline SaddleReport domain_saddle_check(const DomainSolution& sol, const CertifyOptions& opt = {}) {
  const DomainProblem& problem = sol.problem;
  SaddleReport report;
  for (double a : sol.alphas) {
    report.guarantee += a;
  }
  report.at_most("guarantee_sum", std::abs(report.guarantee - sol.guarantee), 1e-12, "|sum alpha - guarantee|");

  double back = 0.0;
  double norm = 0.0;
  const RandomPriceMenu menu = sol.menu();
  for (std::size_t k = 0; k < sol.alphas.size(); ++k) {
    const double a = sol.alphas[k];
    back = std::max(back, std::abs(a * (1.0 + std::log(problem.caps[k] / a)) - problem.bundle_mean(k)));
    const BundlePrice& p = menu.price(k);
    const double mass = quadrature::integrate([&](double x) { return p.density(x); }, p.alpha, p.beta);
    norm = std::max(norm, std::abs(mass - 1.0));
  }
  report.at_most("equation_residuals", back, 1e-12, "|alpha (1 + ln(cap / alpha)) - m|");
  report.at_most("price_normalisation", norm, 1e-12, "|integral of g - 1|");

  const CurveDistribution curve = sol.curve();
  double moment = 0.0;
  for (std::size_t i = 0; i < problem.n(); ++i) {
    const double mean = expect_curve(curve, [&](std::span<const double> v) { return v[i]; });
    moment = std::max(moment, std::abs(mean - problem.means[i]));
  }
  report.at_most("moment_residual", moment, 1e-10, "worst-case curve means versus item means");

  const DirectMechanism mech(menu);
  report.at_most("revenue_identity", std::abs(revenue(mech, curve) - report.guarantee), 1e-8,
                 "|R(M*, F*) - sum alpha|");

  double second = 0.0;
  for (std::size_t k = 0; k < sol.alphas.size(); ++k) {
    const BundlePrice& p = menu.price(k);
    const double h = (p.beta - p.alpha) / 64.0;
    for (int j = 1; j < 64; ++j) {
      const double w = p.alpha + h * j;
      second = std::max(second, std::abs(p.payment(w + h) - 2.0 * p.payment(w) + p.payment(w - h)));
    }
  }
  report.at_most("payment_linearity", second, 1e-12, "max second difference of t* on [alpha, cap]");

  detail::flatness_check(report, curve);
  detail::seller_checks(report, curve, problem.partition, opt.sweep);

  NatureResult nat;
  const MomentTargets targets{problem.partition, problem.means, {}, {}};
  lp_trials(nat, mech, curve, targets, opt.nature,
            [&](std::span<const double> v) { return within_caps(problem, v); });
  nat.record("worst_case_curve", revenue(mech, curve));
  detail::nature_check(report, nat);
  return report;
}

}  // namespace robust_bundling
