#include <cmath>
#include <map>
#include <random>
#include <set>
#include <variant>
#include <vector>

#include <gtest/gtest.h>

#include "robust_bundling/adversary.hpp"
#include "robust_bundling/mechanism.hpp"

namespace rb = robust_bundling;
using rb::DispersionFunction;
using rb::Interval;

namespace {

rb::SaddleSolution solve(std::size_t n, rb::Partition partition, std::vector<double> means,
                         std::vector<double> s) {
  rb::AmbiguityProblem p;
  p.n = n;
  p.partition = std::move(partition);
  for (double m : means) {
    p.means.push_back(Interval::point(m));
  }
  for (double x : s) {
    p.dispersions.push_back({DispersionFunction::quadratic(), Interval::point(x)});
  }
  return rb::minimize_guarantee(p);
}

rb::SaddleSolution figure1() { return solve(2, rb::finest_partition(2), {0.6, 0.5}, {0.1, 0.1}); }
rb::SaddleSolution figure4() { return solve(2, rb::coarsest_partition(2), {0.6, 0.5}, {0.1}); }

std::map<double, double> total_cdf(const rb::DiscreteDistribution& d) {
  std::map<double, double> mass;
  for (std::size_t k = 0; k < d.size(); ++k) {
    double w = 0.0;
    for (double v : d.points[k]) {
      w += v;
    }
    mass[w] += d.weights[k];
  }
  return mass;
}

}  // namespace

TEST(Seeds, TrialSeedsAreDeterministicAndDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    EXPECT_EQ(rb::trial_seed(17, t), rb::trial_seed(17, t));
    seen.insert(rb::trial_seed(17, t));
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(rb::trial_seed(17, 0), rb::trial_seed(18, 0));
}

TEST(LpAdversary, QuantileSupportOfWorstCaseIsFeasible) {
  const auto sol = figure1();
  const auto targets = rb::MomentTargets::from_solution(sol);
  const auto curve = rb::CurveDistribution::from_solution(sol);
  const auto d = rb::discretize_curve(curve, 200);
  // The quantile masses themselves satisfy the rows up to discretisation error.
  EXPECT_LE(targets.max_residual(d), 1e-4);
  const auto res = rb::lp_feasible_distribution(targets, d.points, 1);
  ASSERT_TRUE(std::holds_alternative<rb::DiscreteDistribution>(res));
  const auto& f = std::get<rb::DiscreteDistribution>(res);
  EXPECT_NO_THROW(f.validate());
  EXPECT_LE(targets.max_residual(f), 1e-9);
}

TEST(LpAdversary, TwoPointSupportForcesItsDispersion) {
  const double m = 0.6;
  // Mean m on {0, 2m} forces weights (1/2, 1/2) and dispersion m^2 = 0.36.
  rb::MomentTargets t{rb::finest_partition(1), {m}, {DispersionFunction::quadratic()}, {0.1}};
  const std::vector<std::vector<double>> support{{0.0}, {2 * m}, {0.0}};
  const auto res = rb::lp_feasible_distribution(t, support, 3);
  ASSERT_TRUE(std::holds_alternative<rb::Infeasible>(res));
  EXPECT_GT(std::get<rb::Infeasible>(res).phase_one_objective, 1e-3);
  t.dispersions = {m * m};
  EXPECT_TRUE(std::holds_alternative<rb::DiscreteDistribution>(rb::lp_feasible_distribution(t, support, 3)));
  EXPECT_THROW(rb::lp_feasible_distribution(t, std::vector<std::vector<double>>{{0.0}, {1.2}}, 3), rb::InvalidArgument);
}

TEST(LpAdversary, RandomSupportsNeverBeatTheGuarantee) {
  for (const auto& sol : {figure1(), figure4()}) {
    const auto targets = rb::MomentTargets::from_solution(sol);
    const auto curve = rb::CurveDistribution::from_solution(sol);
    const rb::DirectMechanism mech(rb::build_menu(sol));
    int feasible = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
      const auto seed = rb::trial_seed(99, t);
      const auto support = rb::random_support(curve, sol.chosen_m, 30, seed);
      const auto res = rb::lp_feasible_distribution(targets, support, seed);
      if (const auto* d = std::get_if<rb::DiscreteDistribution>(&res)) {
        ++feasible;
        EXPECT_LE(targets.max_residual(*d), 1e-9);
        EXPECT_GE(rb::revenue(mech, *d), sol.guarantee - 1e-6);
      }
    }
    EXPECT_GT(feasible, 50);
  }
}

TEST(LpAdversary, SameSeedSameDistribution) {
  const auto sol = figure1();
  const auto targets = rb::MomentTargets::from_solution(sol);
  const auto curve = rb::CurveDistribution::from_solution(sol);
  const auto support = rb::random_support(curve, sol.chosen_m, 30, 5);
  const auto a = std::get<rb::DiscreteDistribution>(rb::lp_feasible_distribution(targets, support, 5));
  const auto b = std::get<rb::DiscreteDistribution>(rb::lp_feasible_distribution(targets, support, 5));
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(CornerTransfer, PreservesMeansDispersionAndTotals) {
  const auto sol = figure4();
  const auto curve = rb::CurveDistribution::from_solution(sol);
  const auto base = rb::prop3_distribution(curve, 0.0);
  const auto moved = rb::prop3_distribution(curve, 0.01);
  EXPECT_NO_THROW(moved.validate());
  const auto targets = rb::MomentTargets::from_solution(sol);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(moved.expect([&](std::span<const double> v) { return v[i]; }), sol.chosen_m[i], 1e-8);
    EXPECT_NEAR(moved.expect([&](std::span<const double> v) { return v[i]; }),
                base.expect([&](std::span<const double> v) { return v[i]; }), 1e-12);
  }
  EXPECT_LE(targets.max_residual(moved), 1e-6);
  const auto cb = total_cdf(base);
  const auto cm = total_cdf(moved);
  // Totals agree up to rounding, so both cdfs are read with a 1e-12 window.
  auto cdf_at = [](const std::map<double, double>& c, double w) {
    double acc = 0.0;
    for (auto it = c.begin(); it != c.end() && it->first <= w + 1e-12; ++it) {
      acc += it->second;
    }
    return acc;
  };
  for (const auto* c : {&cb, &cm}) {
    for (const auto& [w, mass] : *c) {
      EXPECT_NEAR(cdf_at(cm, w), cdf_at(cb, w), 1e-12) << w;
    }
  }
}

TEST(CornerTransfer, BundledMechanismUnhurt) {
  const auto sol = figure4();
  const rb::DirectMechanism mech(rb::build_menu(sol));
  const auto moved = rb::prop3_distribution(rb::CurveDistribution::from_solution(sol), 0.01);
  EXPECT_GE(rb::revenue(mech, moved), sol.guarantee - 1e-6);
}

TEST(CornerTransfer, Preconditions) {
  const auto sol = figure4();
  const auto curve = rb::CurveDistribution::from_solution(sol);
  const double atom = sol.bundles[0].alpha / sol.bundles[0].beta;
  EXPECT_THROW(rb::prop3_distribution(curve, atom), rb::EpsilonTooLarge);
  EXPECT_THROW(rb::prop3_distribution(curve, -0.1), rb::InvalidArgument);
  EXPECT_THROW(rb::prop3_distribution(rb::CurveDistribution::from_solution(figure1()), 0.01), rb::InvalidArgument);
}

TEST(FlattenedTail, MaximalRatioItemLosesAlpha) {
  const auto sol = figure1();
  const auto p = rb::prop2_distribution(sol, 1e-3);
  ASSERT_TRUE(p.in_max_set[1]);
  ASSERT_FALSE(p.in_max_set[0]);
  EXPECT_LT(p.alpha_eps[1], sol.bundles[1].alpha);
  EXPECT_EQ(p.alpha_eps[0], sol.bundles[0].alpha);
  EXPECT_EQ(p.ell_eps[0], sol.bundles[0].ell);
  EXPECT_LE(p.max_residual, 1e-10);
  EXPECT_LT(p.bundling_limit, sol.guarantee);
  const double cut = rb::prop2_cut(sol);
  EXPECT_GT(cut, sol.bundles[0].ell);
  EXPECT_LT(cut, sol.bundles[1].ell);
  EXPECT_DOUBLE_EQ(p.cut_ell, cut);
}

TEST(FlattenedTail, MomentsHoldOnPerturbedCurve) {
  const auto sol = figure1();
  const auto p = rb::prop2_distribution(sol, 1e-2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(rb::expect_curve(p.curve, [&](std::span<const double> v) { return v[i]; }), sol.chosen_m[i], 1e-8);
    EXPECT_NEAR(rb::expect_curve(p.curve, [&](std::span<const double> v) { return std::pow(v[i] - sol.chosen_m[i], 2); }),
                sol.chosen_s[i], 1e-8);
    EXPECT_NEAR(p.discrete.expect([&](std::span<const double> v) { return v[i]; }), sol.chosen_m[i], 1e-8);
  }
  // Flattened driver is a valid cdf.
  double prev = 0.0;
  for (double x = 1.0; x < 20.0; x += 1e-3) {
    const double F = p.curve.driver.cdf(x);
    EXPECT_GE(F, prev);
    prev = F;
  }
  EXPECT_NEAR(p.curve.driver.cdf(1e12), 1.0, 1e-11);
}

TEST(FlattenedTail, ContinuousAtZero) {
  const auto sol = figure1();
  const auto p = rb::prop2_distribution(sol, 1e-7);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(p.alpha_eps[i], sol.bundles[i].alpha, 1e-6);
    EXPECT_NEAR(p.ell_eps[i], sol.bundles[i].ell, 1e-6);
  }
}

TEST(FlattenedTail, ImplicitDerivativeMatchesFiniteDifference) {
  const auto sol = figure1();
  const double cut = rb::prop2_cut(sol);
  const auto d = rb::prop2_derivative(sol.bundles[1], sol.kernels[1], cut);
  const double h = 1e-4;
  const auto p = rb::prop2_distribution(sol, h, 0.5, 16);
  const double fd = (p.alpha_eps[1] - sol.bundles[1].alpha) / h;
  EXPECT_LT(d.implicit, 0.0);
  EXPECT_NEAR(fd, d.implicit, 1e-3 * std::abs(d.implicit));
  // The ratio with both integrals over [1, l_i] is far off and is reported, not used.
  EXPECT_GT(std::abs(d.printed - fd), 100 * std::abs(fd));
}

TEST(FlattenedTail, Preconditions) {
  const auto twins = solve(2, rb::finest_partition(2), {0.5, 0.5}, {0.1, 0.1});
  EXPECT_THROW(rb::prop2_distribution(twins, 1e-3), rb::HypothesisViolated);
  const auto sol = figure1();
  EXPECT_THROW(rb::prop2_distribution(sol, 10.0), rb::EpsilonTooLarge);
  EXPECT_THROW(rb::prop2_distribution(sol, 0.0), rb::EpsilonTooLarge);
  EXPECT_THROW(rb::prop2_distribution(figure4(), 1e-3), rb::InvalidArgument);
  EXPECT_THROW(rb::prop2_distribution(sol, 1e-3, 1.5), rb::InvalidArgument);
}
