#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "robust_bundling/dispersion.hpp"

using robust_bundling::DispersionFunction;

TEST(Dispersion, EvalExamples) {
  const auto sq = DispersionFunction::quadratic();
  EXPECT_EQ(eval(sq, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(eval(sq, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(eval(DispersionFunction::quartic(1.0, 1.0), 2.0), 20.0);
}

TEST(Dispersion, DerivativeExamples) {
  const auto sq = DispersionFunction::quadratic();
  EXPECT_DOUBLE_EQ(deriv(sq, 0.3, 1), 0.6);
  EXPECT_DOUBLE_EQ(deriv(sq, -7.0, 2), 2.0);
  EXPECT_DOUBLE_EQ(deriv(sq, 123.0, 2), 2.0);
  EXPECT_DOUBLE_EQ(deriv(DispersionFunction::quartic(1.0, 1.0), 1.0, 1), 6.0);
}

TEST(Dispersion, RejectsBadCoefficientsAndOrders) {
  EXPECT_THROW(DispersionFunction::quartic(0.0, 1.0), robust_bundling::InvalidArgument);
  EXPECT_THROW(DispersionFunction::quartic(1.0, -0.1), robust_bundling::InvalidArgument);
  EXPECT_THROW(deriv(DispersionFunction::quadratic(), 0.0, 3), robust_bundling::InvalidArgument);
}

TEST(Dispersion, QuadraticIsQuarticWithUnitA) {
  const auto q = DispersionFunction::quartic(1.0, 0.0);
  const auto sq = DispersionFunction::quadratic();
  for (double x : {-1.5, 0.0, 0.2, 3.0}) {
    EXPECT_EQ(q(x), sq(x));
    EXPECT_EQ(q.first(x), sq.first(x));
  }
}

class DispersionProperties : public ::testing::TestWithParam<std::pair<double, double>> {};

TEST_P(DispersionProperties, DerivativesMatchFiniteDifferencesAndConvexity) {
  const auto [a, b] = GetParam();
  const auto phi = DispersionFunction::quartic(a, b);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  double prev_x = -3.0;
  for (int k = 0; k < 10000; ++k) {
    const double x = unif(rng);
    const double h = 1e-5;
    const double fd = (phi(x + h) - phi(x - h)) / (2 * h);
    EXPECT_LE(std::abs(deriv(phi, x, 1) - fd), 1e-6 * (1 + std::pow(std::abs(x), 3)));
    EXPECT_GE(deriv(phi, x, 2), 2 * a);
    EXPECT_EQ(phi(x), phi(-x));
    const double lo = std::min(prev_x, x);
    const double hi = std::max(prev_x, x);
    if (hi > lo) {
      EXPECT_LT(phi.first(lo), phi.first(hi));
    }
    prev_x = x;
  }
  EXPECT_EQ(phi(0.0), 0.0);
  EXPECT_DOUBLE_EQ(phi.strong_convexity(), 2 * a);
}

INSTANTIATE_TEST_SUITE_P(Kernels, DispersionProperties,
                         ::testing::Values(std::pair{1.0, 0.0}, std::pair{1.0, 1.0}, std::pair{0.3, 2.5},
                                           std::pair{2.0, 0.01}));
