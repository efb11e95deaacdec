#include <cmath>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <gtest/gtest.h>

#include "robust_bundling/domain_variant.hpp"

namespace rb = robust_bundling;

namespace {

rb::DomainProblem figure_c1() { return {rb::finest_partition(2), {0.6, 0.5}, {1.0, 1.0}}; }

double toms748_alpha(double m, double cap) {
  auto f = [&](double a) { return a * (1.0 + std::log(cap / a)) - m; };
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, 1e-300, m, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

TEST(SolveDomain, MatchesIndependentRootAndBackSubstitutes) {
  const auto sol = rb::solve_domain(figure_c1());
  ASSERT_EQ(sol.alphas.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const double m = sol.problem.means[k];
    EXPECT_NEAR(sol.alphas[k], toms748_alpha(m, 1.0), 1e-13);
    EXPECT_NEAR(sol.alphas[k] * (1.0 + std::log(1.0 / sol.alphas[k])), m, 1e-12);
    EXPECT_LT(sol.alphas[k], m);
  }
  EXPECT_EQ(sol.guarantee, sol.alphas[0] + sol.alphas[1]);
}

TEST(SolveDomain, TightCapForcesMean) {
  // cap = m (1 + d) gives m - alpha ~ m sqrt(2 d).
  for (double d : {1e-5, 1e-7, 1e-9}) {
    const double gap = 0.6 - rb::solve_domain_alpha(0.6, 0.6 * (1 + d));
    EXPECT_NEAR(gap, 0.6 * std::sqrt(2.0 * d), 1e-2 * gap);
  }
}

TEST(SolveDomain, ScalesLinearly) {
  const double a = rb::solve_domain_alpha(0.6, 1.0);
  EXPECT_NEAR(rb::solve_domain_alpha(1.8, 3.0), 3.0 * a, 1e-10);
}

TEST(SolveDomain, RejectsInvalidProblems) {
  EXPECT_THROW(rb::solve_domain({rb::finest_partition(2), {0.6, 0.5}, {0.5, 1.0}}), rb::InvalidArgument);
  EXPECT_THROW(rb::solve_domain({rb::finest_partition(2), {-0.6, 0.5}, {1.0, 1.0}}), rb::InvalidArgument);
  EXPECT_THROW(rb::solve_domain({rb::coarsest_partition(2), {0.6, 0.5}, {1.0}}), rb::InvalidArgument);
  EXPECT_THROW(rb::solve_domain({rb::finest_partition(2), {0.6, 0.5}, {1.0}}), rb::InvalidArgument);
}

TEST(DomainMechanism, LogDensityAndLinearPayment) {
  const auto sol = rb::solve_domain(figure_c1());
  const auto menu = sol.menu();
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& p = menu.price(k);
    EXPECT_NEAR(p.exact_cdf(p.beta - 1e-15), 1.0, 1e-12);
    EXPECT_NEAR(p.density(0.7), 1.0 / (std::log(1.0 / sol.alphas[k]) * 0.7), 1e-15);
    const double h = (p.beta - p.alpha) / 50.0;
    for (int j = 1; j < 50; ++j) {
      const double w = p.alpha + j * h;
      EXPECT_LE(std::abs(p.payment(w + h) - 2 * p.payment(w) + p.payment(w - h)), 1e-12);
    }
    EXPECT_EQ(p.payment(0.5 * p.alpha), 0.0);
  }
}

TEST(DomainMechanism, PostedPriceFlatUpToCap) {
  const auto sol = rb::solve_domain(figure_c1());
  const auto curve = sol.curve();
  for (std::size_t k = 0; k < 2; ++k) {
    const double a = sol.alphas[k];
    for (int j = 0; j < 10; ++j) {
      const double p = a + (1.0 - a) * j / 10.0;
      EXPECT_NEAR(rb::posted_price_revenue(curve, k, p), a, 1e-12);
    }
  }
}

TEST(DomainSaddle, FullCertificate) {
  const auto report = rb::domain_saddle_check(rb::solve_domain(figure_c1()));
  for (const auto& c : report.checks) {
    EXPECT_TRUE(c.passed) << c.name << " " << c.value;
  }
  const auto bundled = rb::domain_saddle_check(rb::solve_domain({rb::coarsest_partition(2), {0.6, 0.5}, {2.0}}));
  EXPECT_TRUE(bundled.passed());
}

TEST(DomainSaddle, CapViolatingPointsAreFiltered) {
  const auto problem = figure_c1();
  std::vector<std::vector<double>> support{{0.5, 0.5}, {1.2, 0.1}, {0.9, 1.0}, {0.2, 1.0001}};
  const auto kept = rb::filter_to_caps(problem, support);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(kept[1], (std::vector<double>{0.9, 1.0}));
  EXPECT_FALSE(rb::within_caps(problem, std::vector<double>{1.2, 0.1}));
}
