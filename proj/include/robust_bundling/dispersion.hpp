#pragma once

#include <cmath>

#include "robust_bundling/errors.hpp"

namespace robust_bundling {

/// Convex dispersion kernel phi(x) = a x^2 + b x^4 with a > 0, b >= 0.
///
/// phi(0) = 0 and phi''(x) = 2a + 12 b x^2 >= 2a, so every kernel of the family
/// is strongly convex with modulus 2a. The quadratic kernel (a = 1, b = 0)
/// turns the dispersion moment into the variance.
class DispersionFunction {
 public:
  enum class Kind { Quadratic, QuarticAugmented };

  /// phi(x) = x^2.
  constexpr DispersionFunction() = default;

  static DispersionFunction quadratic() { return DispersionFunction{}; }

  static DispersionFunction quartic(double a, double b) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidArgument("quartic kernel needs a > 0");
    }
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw InvalidArgument("quartic kernel needs b >= 0");
    }
    DispersionFunction phi;
    phi.kind_ = Kind::QuarticAugmented;
    phi.a_ = a;
    phi.b_ = b;
    return phi;
  }

  Kind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }

  /// Lower bound on phi''.
  double strong_convexity() const { return 2.0 * a_; }

  double operator()(double x) const { return eval(x); }

  double eval(double x) const {
    const double x2 = x * x;
    return a_ * x2 + b_ * x2 * x2;
  }

  double first(double x) const { return 2.0 * a_ * x + 4.0 * b_ * x * x * x; }

  double second(double x) const { return 2.0 * a_ + 12.0 * b_ * x * x; }

  /// order must be 1 or 2.
  double deriv(double x, int order) const {
    switch (order) {
      case 1:
        return first(x);
      case 2:
        return second(x);
      default:
        throw InvalidArgument("derivative order must be 1 or 2");
    }
  }

  friend bool operator==(const DispersionFunction&, const DispersionFunction&) = default;

 private:
  Kind kind_ = Kind::Quadratic;
  double a_ = 1.0;
  double b_ = 0.0;
};

inline double eval(const DispersionFunction& phi, double x) { return phi.eval(x); }

inline double deriv(const DispersionFunction& phi, double x, int order) {
  return phi.deriv(x, order);
}

}  // namespace robust_bundling
