#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "robust_bundling/errors.hpp"

namespace robust_bundling::simplex {

struct PhaseOneResult {
  bool feasible = false;
  double objective = 0.0;  ///< sum of artificial variables at the optimum
  std::vector<double> x;   ///< a basic feasible point when feasible
  std::size_t pivots = 0;
};

/// Dense-tableau phase-one simplex for { x >= 0 : A x = b }.
///
/// One artificial per row; minimises their sum with Bland's rule, so the
/// method terminates without cycling. `a` is row-major, rows x cols.
inline PhaseOneResult phase_one(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                                double feas_tol = 1e-10) {
  const std::size_t rows = a.size();
  if (b.size() != rows) {
    throw InvalidArgument("row count mismatch between A and b");
  }
  const std::size_t cols = rows == 0 ? 0 : a.front().size();
  const std::size_t width = cols + rows + 1;  // structural | artificial | rhs
  const std::size_t rhs = width - 1;
  constexpr double kPivotTol = 1e-12;

  std::vector<std::vector<double>> t(rows + 1, std::vector<double>(width, 0.0));
  std::vector<std::size_t> basis(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (a[r].size() != cols) {
      throw InvalidArgument("ragged constraint matrix");
    }
    const double sign = b[r] < 0.0 ? -1.0 : 1.0;
    for (std::size_t c = 0; c < cols; ++c) {
      t[r][c] = sign * a[r][c];
    }
    t[r][cols + r] = 1.0;
    t[r][rhs] = sign * b[r];
    basis[r] = cols + r;
  }
  // Reduced costs of the phase-one objective sum(artificials).
  std::vector<double>& z = t[rows];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      z[c] -= t[r][c];
    }
    z[rhs] -= t[r][rhs];
  }

  PhaseOneResult out;
  const std::size_t max_pivots = 50 * (rows + cols + 1);
  while (out.pivots < max_pivots) {
    std::size_t enter = width;
    for (std::size_t c = 0; c + 1 < width; ++c) {
      if (z[c] < -kPivotTol) {
        enter = c;
        break;
      }
    }
    if (enter == width) {
      break;
    }
    std::size_t leave = rows;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) {
      if (t[r][enter] > kPivotTol) {
        const double ratio = t[r][rhs] / t[r][enter];
        if (ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 && leave < rows && basis[r] < basis[leave])) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    if (leave == rows) {
      break;  // unbounded direction; cannot happen for a phase-one objective bounded below by 0
    }
    const double piv = t[leave][enter];
    for (double& v : t[leave]) {
      v /= piv;
    }
    for (std::size_t r = 0; r <= rows; ++r) {
      if (r == leave) {
        continue;
      }
      const double f = t[r][enter];
      if (f == 0.0) {
        continue;
      }
      for (std::size_t c = 0; c < width; ++c) {
        t[r][c] -= f * t[leave][c];
      }
    }
    basis[leave] = enter;
    ++out.pivots;
  }

  out.objective = -z[rhs];
  out.feasible = out.objective <= feas_tol;
  out.x.assign(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (basis[r] < cols) {
      out.x[basis[r]] = std::max(0.0, t[r][rhs]);
    }
  }
  return out;
}

}  // namespace robust_bundling::simplex
