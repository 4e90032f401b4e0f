#pragma once

#include <cmath>

#include "isacsim/errors.hpp"
#include "isacsim/types.hpp"

namespace isacsim {

/// Cholesky factor L (lower) of a symmetric positive-definite matrix.
/// The input is symmetrized first. A pivot below 1e-14 relative to its own
/// row's original diagonal counts as singular: the matrices here carry
/// position and velocity blocks tens of orders of magnitude apart, so the
/// pivot test has to be per-direction rather than against the global scale.
/// Internals run in extended precision; the covariances produced by the
/// filter encode near-unit position-velocity correlations whose complements
/// sit close to the double rounding floor.
template <int N>
Eigen::Matrix<double, N, N> spd_cholesky(const Eigen::Matrix<double, N, N>& a,
                                         const char* context) {
  using MatL = Eigen::Matrix<long double, N, N>;
  MatL s = (0.5 * (a + a.transpose())).template cast<long double>();

  MatL l = MatL::Zero();
  for (int j = 0; j < N; ++j) {
    long double d = s(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    const long double pivot_floor =
        1e-14L * std::max(std::abs(s(j, j)), (long double)1e-300);
    if (!(d > pivot_floor)) {
      throw SingularMatrixError(std::string(context) + ": pivot " +
                                std::to_string(static_cast<double>(d)) +
                                " below tolerance at row " + std::to_string(j));
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < N; ++i) {
      long double v = s(i, j);
      for (int k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l.template cast<double>();
}

/// Inverse of an SPD matrix via the pivot-checked Cholesky above.
template <int N>
Eigen::Matrix<double, N, N> spd_inverse(const Eigen::Matrix<double, N, N>& a,
                                        const char* context) {
  using MatL = Eigen::Matrix<long double, N, N>;
  const MatL l = spd_cholesky<N>(a, context).template cast<long double>();
  // Invert L by forward substitution, then A^-1 = L^-T L^-1.
  MatL linv = MatL::Zero();
  for (int j = 0; j < N; ++j) {
    linv(j, j) = 1.0L / l(j, j);
    for (int i = j + 1; i < N; ++i) {
      long double v = 0.0L;
      for (int k = j; k < i; ++k) v += l(i, k) * linv(k, j);
      linv(i, j) = -v / l(i, i);
    }
  }
  MatL inv = linv.transpose() * linv;
  inv = 0.5L * (inv + inv.transpose());
  return inv.template cast<double>();
}

inline Mat4 spd_inverse4(const Mat4& a, const char* context) { return spd_inverse<4>(a, context); }

/// Solve A x = b for SPD A.
template <int N>
Eigen::Matrix<double, N, 1> spd_solve(const Eigen::Matrix<double, N, N>& a,
                                      const Eigen::Matrix<double, N, 1>& b,
                                      const char* context) {
  const auto l = spd_cholesky<N>(a, context);
  Eigen::Matrix<double, N, 1> y;
  for (int i = 0; i < N; ++i) {
    double v = b(i);
    for (int k = 0; k < i; ++k) v -= l(i, k) * y(k);
    y(i) = v / l(i, i);
  }
  Eigen::Matrix<double, N, 1> x;
  for (int i = N - 1; i >= 0; --i) {
    double v = y(i);
    for (int k = i + 1; k < N; ++k) v -= l(k, i) * x(k);
    x(i) = v / l(i, i);
  }
  return x;
}

}  // namespace isacsim
