#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <vector>

#include <math.h>  // pchip calls isnan unqualified
#include <boost/math/interpolators/pchip.hpp>

#include "robust_bundling/dispersion.hpp"
#include "robust_bundling/saddle_core.hpp"
#include "robust_bundling/worst_case.hpp"

namespace robust_bundling {

/// Random posted price for one bundle, supported on [alpha, beta].
///
/// Moment mode: g(p) = lambda (phi'(beta - m) - phi'(p - m)) / p.
/// Domain mode: g(p) = 1 / (ln(beta / alpha) p), the cap playing the role of beta.
struct BundlePrice {
  enum class Mode { Moment, Domain };

  Mode mode = Mode::Moment;
  double alpha = 0.0;
  double beta = 0.0;
  double m = 0.0;
  double lambda = 0.0;
  DispersionFunction phi;

  double density(double p) const {
    if (p < alpha || p > beta) {
      return 0.0;
    }
    if (mode == Mode::Domain) {
      return 1.0 / (std::log(beta / alpha) * p);
    }
    return lambda * (phi.first(beta - m) - phi.first(p - m)) / p;
  }

  /// Exact cdf from the antiderivative of the density.
  double exact_cdf(double p) const {
    if (p <= alpha) {
      return 0.0;
    }
    if (p >= beta) {
      return 1.0;
    }
    if (mode == Mode::Domain) {
      return std::log(p / alpha) / std::log(beta / alpha);
    }
    return lambda * unnormalised_mass(p);
  }

  /// Expected payment of a buyer whose bundle value is w: E[price; price <= w].
  double payment(double w) const {
    if (w < alpha) {
      return 0.0;
    }
    const double x = std::min(w, beta);
    if (mode == Mode::Domain) {
      return (x - alpha) / std::log(beta / alpha);
    }
    return lambda * (phi.first(beta - m) * (x - alpha) - phi(x - m) + phi(alpha - m));
  }

  /// int_alpha^p (phi'(beta - m) - phi'(x - m)) / x dx for the polynomial kernel.
  double unnormalised_mass(double p) const {
    // phi'(x - m) = d3 x^3 + d2 x^2 + d1 x + d0
    const double a = phi.a();
    const double b = phi.b();
    const double d3 = 4.0 * b;
    const double d2 = -12.0 * b * m;
    const double d1 = 2.0 * a + 12.0 * b * m * m;
    const double d0 = -2.0 * a * m - 4.0 * b * m * m * m;
    const double c = phi.first(beta - m);
    return (c - d0) * std::log(p / alpha) - d1 * (p - alpha) - d2 * (p * p - alpha * alpha) / 2.0 -
           d3 * (p * p * p - alpha * alpha * alpha) / 3.0;
  }
};

/// Independent random prices, one per bundle, with tabulated cdfs.
class RandomPriceMenu {
 public:
  static constexpr std::size_t kTableSize = 2048;

  RandomPriceMenu(std::size_t n, Partition partition, std::vector<BundlePrice> prices)
      : n_(n), partition_(std::move(partition)), prices_(std::move(prices)) {
    validate_partition(partition_, n_);
    if (prices_.size() != partition_.size()) {
      throw InvalidArgument("one price distribution per bundle required");
    }
    bundle_of_ = block_of(partition_, n_);
    for (const auto& price : prices_) {
      tables_.push_back(make_table(price));
    }
  }

  std::size_t n() const { return n_; }
  const Partition& partition() const { return partition_; }
  std::span<const BundlePrice> prices() const { return prices_; }
  const BundlePrice& price(std::size_t k) const { return prices_[k]; }
  std::size_t bundle_of(std::size_t i) const { return bundle_of_[i]; }

  /// Largest |lambda_menu - lambda_solution| seen at build time.
  double max_lambda_deviation() const { return lambda_deviation_; }
  void set_lambda_deviation(double d) { lambda_deviation_ = d; }

  double density(std::size_t k, double p) const { return prices_[k].density(p); }

  /// Tabulated cdf G_K (monotone cubic interpolation, clamped to [0, 1]).
  double cdf(std::size_t k, double p) const {
    const BundlePrice& price = prices_[k];
    if (p <= price.alpha) {
      return 0.0;
    }
    if (p >= price.beta) {
      return 1.0;
    }
    return std::clamp(tables_[k](p), 0.0, 1.0);
  }

 private:
  using Table = boost::math::interpolators::pchip<std::vector<double>>;

  static Table make_table(const BundlePrice& price) {
    std::vector<double> xs(kTableSize);
    std::vector<double> ys(kTableSize);
    for (std::size_t j = 0; j < kTableSize; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(kTableSize - 1);
      xs[j] = price.alpha + (price.beta - price.alpha) * t;
      ys[j] = price.exact_cdf(xs[j]);
    }
    xs.back() = price.beta;
    ys.front() = 0.0;
    ys.back() = 1.0;
    return Table(std::move(xs), std::move(ys));
  }

  std::size_t n_;
  Partition partition_;
  std::vector<BundlePrice> prices_;
  std::vector<std::size_t> bundle_of_;
  std::vector<Table> tables_;
  double lambda_deviation_ = 0.0;
};

/// Builds the bundled random-price menu of a solved moment problem. lambda is
/// recomputed from the closed-form antiderivative, independently of the
/// solver's quadrature; the deviation is recorded on the menu.
inline RandomPriceMenu build_menu(const SaddleSolution& sol) {
  std::vector<BundlePrice> prices;
  double deviation = 0.0;
  for (std::size_t k = 0; k < sol.bundles.size(); ++k) {
    const BundleSolution& b = sol.bundles[k];
    BundlePrice price;
    price.mode = BundlePrice::Mode::Moment;
    price.alpha = b.alpha;
    price.beta = b.beta;
    price.m = b.m;
    price.phi = sol.kernels[k];
    price.lambda = 1.0 / price.unnormalised_mass(b.beta);
    deviation = std::max(deviation, std::abs(price.lambda - b.lambda));
    prices.push_back(price);
  }
  RandomPriceMenu menu(sol.n(), sol.partition, std::move(prices));
  menu.set_lambda_deviation(deviation);
  return menu;
}

/// Direct mechanism (q*, t*) induced by a random-price menu.
class DirectMechanism {
 public:
  explicit DirectMechanism(RandomPriceMenu menu) : menu_(std::move(menu)) {}

  const RandomPriceMenu& menu() const { return menu_; }
  std::size_t n() const { return menu_.n(); }

  double bundle_sum(std::size_t k, std::span<const double> v) const {
    double acc = 0.0;
    for (std::size_t i : menu_.partition()[k]) {
      acc += v[i];
    }
    return acc;
  }

  /// q*_i(v) = G_K(sum of v over the bundle K containing i).
  std::vector<double> allocation(std::span<const double> v) const {
    std::vector<double> q(n());
    for (std::size_t k = 0; k < menu_.partition().size(); ++k) {
      const double g = menu_.cdf(k, bundle_sum(k, v));
      for (std::size_t i : menu_.partition()[k]) {
        q[i] = g;
      }
    }
    return q;
  }

  /// t*(v), closed form per bundle.
  double payment(std::span<const double> v) const {
    double t = 0.0;
    for (std::size_t k = 0; k < menu_.partition().size(); ++k) {
      t += menu_.price(k).payment(bundle_sum(k, v));
    }
    return t;
  }

  double utility(std::span<const double> v, std::span<const double> report) const {
    const auto q = allocation(report);
    double u = -payment(report);
    for (std::size_t i = 0; i < n(); ++i) {
      u += v[i] * q[i];
    }
    return u;
  }

 private:
  RandomPriceMenu menu_;
};

inline double payment(const DirectMechanism& mech, std::span<const double> v) { return mech.payment(v); }

inline double revenue(const DirectMechanism& mech, const CurveDistribution& dist) {
  return expect_curve(dist, [&](std::span<const double> v) { return mech.payment(v); });
}

inline double revenue(const DirectMechanism& mech, const DiscreteDistribution& dist) {
  return dist.expect([&](std::span<const double> v) { return mech.payment(v); });
}

/// L(v) = t*(v) + sum_K lambda_K phi_K(sum_{j in K} v_j - m_K).
inline double lagrangian(const DirectMechanism& mech, const SaddleSolution& sol, std::span<const double> v) {
  double value = mech.payment(v);
  for (std::size_t k = 0; k < sol.bundles.size(); ++k) {
    const BundleSolution& b = sol.bundles[k];
    value += b.lambda * sol.kernels[k](mech.bundle_sum(k, v) - b.m);
  }
  return value;
}

/// Price densities as CSV: bundle, p, g(p) on `samples` points per bundle.
inline void write_price_density_csv(std::ostream& os, const RandomPriceMenu& menu, std::size_t samples) {
  os << "bundle,p,g\n";
  char buf[96];
  for (std::size_t k = 0; k < menu.prices().size(); ++k) {
    const BundlePrice& price = menu.price(k);
    for (std::size_t j = 0; j < samples; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(samples - 1);
      const double p = j + 1 == samples ? price.beta : price.alpha + (price.beta - price.alpha) * t;
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", k, p, price.density(p));
      os << buf;
    }
  }
}

/// t*(v1, v2) on a square grid; two items only.
inline void write_revenue_surface_csv(std::ostream& os, const DirectMechanism& mech, std::size_t samples) {
  if (mech.n() != 2) {
    throw InvalidArgument("revenue surface needs exactly two items");
  }
  double top = 0.0;
  for (const auto& price : mech.menu().prices()) {
    top = std::max(top, price.beta);
  }
  top *= 1.2;
  os << "v_1,v_2,t\n";
  char buf[96];
  for (std::size_t a = 0; a < samples; ++a) {
    for (std::size_t b = 0; b < samples; ++b) {
      const double v[2] = {top * a / (samples - 1), top * b / (samples - 1)};
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", v[0], v[1], mech.payment(v));
      os << buf;
    }
  }
}

}  // namespace robust_bundling
