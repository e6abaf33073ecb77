#pragma once

// Deterministic randomness and small dense linear-algebra kernels.
//
// Rng draws only raw 64-bit words from std::mt19937_64 and maps them to
// doubles itself, so identical seeds give identical streams on every
// platform (the standard library distributions are not portable).

#include <cstdint>
#include <random>

#include "attnlab/types.hpp"

namespace attnlab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform double in [0, 1), 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller on raw engine words.
  double normal();
  std::uint64_t next_u64();

  /// Independent stream keyed by (seed, stream); reproducible per stream
  /// index regardless of how much the parent has drawn.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng);

/// Haar-distributed orthogonal d x d matrix: QR of a Gaussian matrix with the
/// sign of diag(R) pushed into Q.
Matrix random_orthogonal(Index d, Rng& rng);

/// Rows i.i.d. uniform on the unit sphere S^{d-1}.
TokenMatrix sample_sphere_rows(Index n, Index d, Rng& rng);

/// Unit rows with pairwise inner products >= 0. Rejection around a random
/// pole: rows are redrawn until they land in the pole's open hemisphere and
/// the batch is retried until min pairwise cosine >= 0; later attempts bias
/// rows toward the pole so the budget terminates. Throws when the budget is
/// exhausted.
TokenMatrix sample_hemisphere_rows(Index n, Index d, Rng& rng, int max_attempts = 64);

struct SvdResult {
  Matrix U;
  Vector singular_values;  // nonincreasing, nonnegative
  Matrix V;

  Matrix reconstruct() const;
};

SvdResult svd(const Matrix& X);
double min_singular(const Matrix& X);
/// sigma_2 / sigma_1; zero when min(N,d) == 1 or sigma_1 == 0.
double sigma2_over_sigma1(const Matrix& X);
/// Number of singular values above rel_tol * sigma_1.
int numerical_rank(const Matrix& X, double rel_tol = 1e-8);

double spectral_norm(const Matrix& M);
/// Power iteration on M^T M from a deterministic start vector.
double spectral_norm_power_iteration(const Matrix& M, int max_iters = 500,
                                     double tol = 1e-13);

bool all_finite(const Matrix& X);
bool has_unit_rows(const Matrix& X, double tol = 1e-12);

}  // namespace attnlab
