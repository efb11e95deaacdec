#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "robust_bundling/worst_case.hpp"

namespace rb = robust_bundling;
using rb::DispersionFunction;
using rb::Interval;

namespace {

rb::SaddleSolution solve(std::size_t n, rb::Partition partition, std::vector<double> means,
                         std::vector<std::pair<DispersionFunction, double>> disp) {
  rb::AmbiguityProblem p;
  p.n = n;
  p.partition = std::move(partition);
  for (double m : means) {
    p.means.push_back(Interval::point(m));
  }
  for (auto& [phi, s] : disp) {
    p.dispersions.push_back({phi, Interval::point(s)});
  }
  return rb::minimize_guarantee(p);
}

rb::SaddleSolution figure1() {
  return solve(2, rb::finest_partition(2), {0.6, 0.5},
               {{DispersionFunction::quadratic(), 0.1}, {DispersionFunction::quadratic(), 0.1}});
}

rb::SaddleSolution figure4() {
  return solve(2, rb::coarsest_partition(2), {0.6, 0.5}, {{DispersionFunction::quadratic(), 0.1}});
}

rb::SaddleSolution mixed() {
  return solve(3, {{0, 1}, {2}}, {0.6, 0.5, 0.3},
               {{DispersionFunction::quartic(1.0, 0.5), 0.1}, {DispersionFunction::quadratic(), 0.03}});
}

// E[(W - m)^4] for W = min(alpha x, alpha ell), x ~ H, expanded term by term.
double quartic_moment_oracle(double alpha, double ell, double m) {
  const double L = std::log(ell);
  const double body = std::pow(m, 4) * (1.0 - 1.0 / ell) - 4.0 * alpha * std::pow(m, 3) * L +
                      6.0 * alpha * alpha * m * m * (ell - 1.0) -
                      4.0 * std::pow(alpha, 3) * m * (ell * ell - 1.0) / 2.0 +
                      std::pow(alpha, 4) * (std::pow(ell, 3) - 1.0) / 3.0;
  return body + std::pow(alpha * ell - m, 4) / ell;
}

double quadratic_moment_oracle(double alpha, double ell, double m) {
  const double L = std::log(ell);
  return m * m * (1.0 - 1.0 / ell) - 2.0 * alpha * m * L + alpha * alpha * (ell - 1.0) +
         std::pow(alpha * ell - m, 2) / ell;
}

double bundle_dispersion(const rb::CurveDistribution& c, const rb::SaddleSolution& sol, std::size_t k) {
  const auto& block = sol.partition[k];
  double mk = 0.0;
  for (std::size_t i : block) {
    mk += sol.chosen_m[i];
  }
  return rb::expect_curve(c, [&](std::span<const double> v) {
    double w = 0.0;
    for (std::size_t i : block) {
      w += v[i];
    }
    return sol.kernels[k](w - mk);
  });
}

}  // namespace

TEST(ExpectCurve, MomentsHoldOnSolvedInstances) {
  for (const auto& sol : {figure1(), figure4(), mixed()}) {
    const auto c = rb::CurveDistribution::from_solution(sol);
    EXPECT_NEAR(rb::expect_curve(c, [](std::span<const double>) { return 1.0; }), 1.0, 1e-12);
    for (std::size_t i = 0; i < sol.n(); ++i) {
      EXPECT_NEAR(rb::expect_curve(c, [&](std::span<const double> v) { return v[i]; }), sol.chosen_m[i], 1e-8);
    }
    for (std::size_t k = 0; k < sol.partition.size(); ++k) {
      EXPECT_NEAR(bundle_dispersion(c, sol, k), sol.chosen_s[k], 1e-8);
    }
  }
}

TEST(ExpectCurve, MatchesPolynomialOracleOffSolution) {
  rb::CurveDistribution c;
  c.n = 1;
  c.partition = {{0}};
  c.bundle_of = {0};
  c.item_shares = {1.0};
  for (auto [alpha, ell, m] : {std::tuple{0.3, 4.0, 0.55}, std::tuple{1.2, 1.7, 1.0}, std::tuple{0.05, 30.0, 0.4}}) {
    c.bundles = {{alpha, alpha * ell, ell}};
    const double q2 = rb::expect_curve(c, [&](std::span<const double> v) { return std::pow(v[0] - m, 2); });
    const double q4 = rb::expect_curve(c, [&](std::span<const double> v) { return std::pow(v[0] - m, 4); });
    EXPECT_NEAR(q2, quadratic_moment_oracle(alpha, ell, m), 1e-10);
    EXPECT_NEAR(q4, quartic_moment_oracle(alpha, ell, m), 1e-10);
    EXPECT_NEAR(rb::expect_curve(c, [](std::span<const double> v) { return v[0]; }), alpha * (1 + std::log(ell)),
                1e-12);
  }
}

TEST(ExpectCurve, BundleSumFollowsCappedRay) {
  const auto sol = mixed();
  const auto c = rb::CurveDistribution::from_solution(sol);
  for (double x : {1.0, 1.7, 2.5, 4.0, 9.0}) {
    for (std::size_t k = 0; k < sol.partition.size(); ++k) {
      EXPECT_NEAR(c.group_sum(sol.partition[k], x), std::min(c.bundles[k].alpha * x, c.bundles[k].beta), 1e-14);
    }
  }
}

TEST(SampleCurve, MonteCarloMeansAndTopAtom) {
  const auto sol = figure1();
  const auto c = rb::CurveDistribution::from_solution(sol);
  const std::size_t count = 1000000;
  const auto d = rb::sample_curve(c, count, 42);
  for (std::size_t i = 0; i < 2; ++i) {
    double s1 = 0.0;
    double s2 = 0.0;
    std::size_t top = 0;
    for (const auto& p : d.points) {
      s1 += p[i];
      s2 += p[i] * p[i];
      top += p[i] == c.bundles[i].beta;
    }
    const double mean = s1 / count;
    const double se = std::sqrt((s2 / count - mean * mean) / count);
    EXPECT_LE(std::abs(mean - sol.chosen_m[i]), 3 * se);
    const double atom = c.bundles[i].alpha / c.bundles[i].beta;
    const double freq = static_cast<double>(top) / count;
    EXPECT_LE(std::abs(freq - atom), 3 * std::sqrt(atom * (1 - atom) / count));
  }
}

TEST(SampleCurve, DeterministicAndOnTheCurve) {
  const auto sol = mixed();
  const auto c = rb::CurveDistribution::from_solution(sol);
  const auto a = rb::sample_curve(c, 1, 9);
  const auto b = rb::sample_curve(c, 1, 9);
  EXPECT_EQ(a.points, b.points);
  const auto d = rb::sample_curve(c, 5000, 10);
  for (const auto& p : d.points) {
    // Recover x from an uncapped coordinate if any, then rebuild the point.
    double x = c.max_ell();
    for (std::size_t i = 0; i < c.n; ++i) {
      const auto& b = c.bundles[c.bundle_of[i]];
      if (p[i] < c.item_shares[i] * b.beta) {
        x = p[i] / (c.item_shares[i] * b.alpha);
        break;
      }
    }
    const auto rebuilt = c.values_at(x);
    for (std::size_t i = 0; i < c.n; ++i) {
      EXPECT_NEAR(rebuilt[i], p[i], 1e-9);
    }
  }
  EXPECT_THROW(rb::sample_curve(c, 0, 1), rb::InvalidArgument);
}

TEST(SampleCurve, AgreesWithQuadratureOnRandomIntegrands) {
  const auto sol = mixed();
  const auto c = rb::CurveDistribution::from_solution(sol);
  const std::size_t count = 200000;
  const auto d = rb::sample_curve(c, count, 77);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    const double a = coef(rng), b = coef(rng), e = coef(rng), w = coef(rng);
    auto f = [&](std::span<const double> v) { return std::sin(a * v[0] + b * v[1] + e * v[2]) + w * std::tanh(v[0] * v[2]); };
    const double exact = rb::expect_curve(c, f);
    double s1 = 0.0, s2 = 0.0;
    for (const auto& p : d.points) {
      const double y = f(p);
      s1 += y;
      s2 += y * y;
    }
    const double mean = s1 / count;
    const double se = std::sqrt(std::max(0.0, s2 / count - mean * mean) / count);
    EXPECT_LE(std::abs(mean - exact), 4 * se + 1e-12) << "integrand " << t;
  }
}

TEST(PostedPrice, FlatOnSupportAndLowerOutside) {
  for (const auto& sol : {figure1(), figure4(), mixed()}) {
    const auto c = rb::CurveDistribution::from_solution(sol);
    for (std::size_t k = 0; k < c.partition.size(); ++k) {
      const auto& b = c.bundles[k];
      for (double p : {b.alpha, 0.5 * (b.alpha + b.beta), b.beta * (1 - 1e-9)}) {
        EXPECT_NEAR(rb::posted_price_revenue(c, k, p), b.alpha, 1e-10);
      }
      EXPECT_NEAR(rb::posted_price_revenue(c, k, b.alpha / 2), b.alpha / 2, 1e-15);
      EXPECT_EQ(rb::posted_price_revenue(c, k, b.beta * 1.01), 0.0);
    }
  }
  EXPECT_THROW(rb::posted_price_revenue(rb::CurveDistribution::from_solution(figure1()), 0, 0.0), rb::InvalidArgument);
}

TEST(Discretize, PreservesMassAndMoments) {
  const auto sol = mixed();
  const auto c = rb::CurveDistribution::from_solution(sol);
  const auto d = rb::discretize_curve(c, 10000);
  EXPECT_NO_THROW(d.validate());
  for (std::size_t i = 0; i < sol.n(); ++i) {
    EXPECT_NEAR(d.expect([&](std::span<const double> v) { return v[i]; }), sol.chosen_m[i], 1e-10);
  }
  EXPECT_NEAR(d.weights.back(), 1.0 / c.max_ell(), 1e-12);
}

TEST(Discretize, DispersionErrorShrinksQuadratically) {
  const auto sol = figure4();
  const auto c = rb::CurveDistribution::from_solution(sol);
  auto disp_err = [&](std::size_t bins) {
    const auto d = rb::discretize_curve(c, bins);
    const double m = sol.bundles[0].m;
    return std::abs(d.expect([&](std::span<const double> v) { return sol.kernels[0](v[0] + v[1] - m); }) -
                    sol.chosen_s[0]);
  };
  const double e1 = disp_err(100);
  const double e2 = disp_err(1000);
  EXPECT_LT(e2, e1 / 50);
  EXPECT_LT(disp_err(10000), 1e-6);
}

TEST(Driver, ShiftedCdfIsValid) {
  const rb::ParetoDriver d{3.0, 0.5};
  double prev = 0.0;
  for (double x = 0.5; x < 50.0; x += 0.01) {
    const double F = d.cdf(x);
    EXPECT_GE(F, prev - 1e-15);
    EXPECT_GE(F, 0.0);
    EXPECT_LE(F, 1.0);
    prev = F;
  }
  EXPECT_EQ(d.cdf(0.9), 0.0);
  EXPECT_NEAR(d.cdf(1e9), 1.0, 1e-8);
  EXPECT_DOUBLE_EQ(d.cdf(3.2), d.cdf(3.0));
  EXPECT_DOUBLE_EQ(d.cdf(5.5), 1.0 - 1.0 / 5.0);
}

TEST(DiscreteDistribution, ValidateRejectsBadInput) {
  rb::DiscreteDistribution d{{{0.1, 0.2}, {0.3, 0.4}}, {0.5, 0.5}};
  EXPECT_NO_THROW(d.validate());
  d.weights = {0.5, 0.4};
  EXPECT_THROW(d.validate(), rb::InvalidArgument);
  d.weights = {1.5, -0.5};
  EXPECT_THROW(d.validate(), rb::InvalidArgument);
  d.weights = {0.5, 0.5};
  d.points[0][0] = -1.0;
  EXPECT_THROW(d.validate(), rb::InvalidArgument);
}

TEST(SupportCsv, HeaderAndKinks) {
  const auto sol = figure1();
  const auto c = rb::CurveDistribution::from_solution(sol);
  std::ostringstream os;
  rb::write_support_csv(os, c, 50);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x,v_1,v_2");
  // Both kinks appear as rows, and the last rows sit at the caps.
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g,", c.bundles[1].ell);
  EXPECT_NE(text.find(std::string("\n") + buf), std::string::npos);
  std::istringstream is(text);
  std::string line, last;
  while (std::getline(is, line)) {
    last = line;
  }
  std::snprintf(buf, sizeof buf, "%.17g,%.17g", c.bundles[0].beta, c.bundles[1].beta);
  EXPECT_NE(last.find(buf), std::string::npos);
}
