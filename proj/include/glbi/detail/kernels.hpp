#pragma once

// Scalar and vector kernels shared by the serial logistic loss and the
// column-sharded engine. Both must execute the exact same floating-point
// operations so that a sharded run reproduces the serial run bit for bit.

#include "glbi/types.hpp"

#include <algorithm>
#include <cmath>

namespace glbi::detail {

inline double softplus(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

/// 1 / (1 + exp(m)) without overflow.
inline double logistic_tail(double m) {
  if (m > 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

inline double soft_threshold(double z) {
  const double mag = std::max(std::abs(z) - 1.0, 0.0);
  if (mag == 0.0) return 0.0;
  return z > 0.0 ? mag : -mag;
}

// The three GLBI update lines, spelled once so every engine rounds alike.
inline double intercept_update(double alpha, double kappa, double delta, double grad) {
  return alpha - kappa * delta * grad;
}
inline double dual_update(double z, double delta, double grad) { return z - delta * grad; }
inline double primal_from_dual(double z, double kappa) { return kappa * soft_threshold(z); }

/// Per-sample logistic gradient weight -(1/n) y / (1 + exp((alpha + w) y)).
inline double logistic_weight(double alpha, double w, double y, double inv_n) {
  return -inv_n * y * logistic_tail((alpha + w) * y);
}

/// Dot product with a fixed four-lane summation order, independent of
/// pointer alignment.
inline double column_dot(const double* a, const double* b, Index n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  Index i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

/// Grid constants for order-independent summation of at most `terms`
/// products bounded in magnitude by `bound`.
///
/// Each product t is split as t = q1 + q2 + tail where q1 lies on the grid
/// ulp(sigma1) and q2 on ulp(sigma2). Sums of grid values are exact in
/// double precision, so partial sums may be formed in any grouping and
/// combined later without changing a single bit. The discarded tail is
/// below bound * 2^(2*ceil(log2(terms)) - 103).
struct ReproGrid {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  bool empty = true;
};

inline ReproGrid make_repro_grid(double bound, Index terms) {
  ReproGrid grid;
  if (!(bound > 0.0) || terms <= 0) return grid;
  int e = 0;
  std::frexp(bound, &e);  // bound < 2^e
  int m = 0;
  while ((Index{1} << m) < terms) ++m;
  const int e1 = e + m + 1;
  const int e2 = (e1 - 52) + m + 1;
  grid.sigma1 = std::ldexp(1.5, e1);
  grid.sigma2 = std::ldexp(1.5, e2);
  grid.empty = false;
  return grid;
}

/// acc1 += grid(b * col), acc2 += grid(residual); see ReproGrid.
inline void repro_axpy(const ReproGrid& grid, double b, const double* col,
                       double* acc1, double* acc2, Index n) {
  const double s1 = grid.sigma1;
  const double s2 = grid.sigma2;
  for (Index i = 0; i < n; ++i) {
    const double t = b * col[i];
    const double q1 = (s1 + t) - s1;
    const double r = t - q1;
    const double q2 = (s2 + r) - s2;
    acc1[i] += q1;
    acc2[i] += q2;
  }
}

}  // namespace glbi::detail
