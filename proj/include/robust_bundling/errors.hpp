#pragma once

#include <stdexcept>
#include <string>

namespace robust_bundling {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad interval, partition, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bisection bracket could not be established within the iteration budget.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Dispersion below 1e-9 m^2: the worst case collapses to a point mass.
class DegenerateDispersion : public Error {
 public:
  using Error::Error;
};

class EpsilonTooLarge : public Error {
 public:
  using Error::Error;
};

class NewtonDivergence : public Error {
 public:
  using Error::Error;
};

/// The counterexample construction needs at least two distinct ratios beta/alpha.
class HypothesisViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace robust_bundling
