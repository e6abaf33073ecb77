#pragma once

// Scalar observables of token geometry.

#include <stdexcept>

#include "attnlab/types.hpp"

namespace attnlab {

/// Frobenius distance from X to the rank-one matrix of its row mean:
/// mu(X) = ||X - 1 (1^T X / N)||_F. Zero iff all rows are equal.
template <class Derived>
double mu(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const VecX<Scalar> mean = X.colwise().mean();
  return (X.rowwise() - mean.transpose()).norm();
}

/// Tolerance used when asserting "all rows equal" through mu.
template <class Derived>
double mu_zero_tolerance(const Eigen::MatrixBase<Derived>& X) {
  return 1e-10 * std::max(1.0, static_cast<double>(X.norm()));
}

/// max - min of a vector.
template <class Derived>
double column_oscillation(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() == 0) return 0.0;
  return static_cast<double>(x.maxCoeff() - x.minCoeff());
}

/// Per-column oscillations of a matrix.
template <class Derived>
Vector column_oscillations(const Eigen::MatrixBase<Derived>& X) {
  Vector osc(X.cols());
  for (Index j = 0; j < X.cols(); ++j) osc(j) = column_oscillation(X.col(j));
  return osc;
}

/// phi: minimum pairwise cosine similarity among rows (rows are normalized
/// first, so this extends the unit-row definition). Throws on a zero row.
double min_pairwise_cosine(const Matrix& X);

/// Average of |cos(X_i, X_j)| over pairs i < j; 1 for a single row.
double mean_abs_cosine(const Matrix& X);

/// ||X||_F^2 / ||X||_2^2. Throws on the zero matrix.
double stable_rank(const Matrix& X);

struct MetricsRow {
  double mu = 0.0;
  double phi = 0.0;
  double stable_rank = 0.0;
  double sigma_min = 0.0;
  int rank = 0;
  double mean_abs_cos = 0.0;
  double sigma2_over_sigma1 = 0.0;
};

/// All per-step observables of a state. Rows that are exactly zero (possible
/// only after severe underflow in un-normalized dynamics) yield NaN cosines
/// instead of aborting the recording.
MetricsRow compute_metrics(const TokenMatrix& X, double rank_rel_tol = 1e-8);

}  // namespace attnlab
