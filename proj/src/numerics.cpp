#include "attnlab/numerics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace attnlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 1)));
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

Matrix random_orthogonal(Index d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("random_orthogonal requires d >= 1");
  const Matrix g = gaussian_matrix(d, d, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

TokenMatrix sample_sphere_rows(Index n, Index d, Rng& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("sample_sphere_rows requires n, d >= 1");
  TokenMatrix x(n, d);
  for (Index i = 0; i < n; ++i) {
    double norm = 0.0;
    do {
      for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
      norm = x.row(i).norm();
    } while (norm == 0.0);
    x.row(i) /= norm;
  }
  return x;
}

TokenMatrix sample_hemisphere_rows(Index n, Index d, Rng& rng, int max_attempts) {
  if (n < 1 || d < 1)
    throw std::invalid_argument("sample_hemisphere_rows requires n, d >= 1");
  const TokenMatrix pole_row = sample_sphere_rows(1, d, rng);
  const Vector pole = pole_row.row(0).transpose();

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    // Unbiased hemisphere rejection first; pull rows toward the pole after
    // repeated failures so the retry budget suffices.
    const double pull = static_cast<double>(attempt);
    TokenMatrix x(n, d);
    bool row_budget_ok = true;
    for (Index i = 0; i < n && row_budget_ok; ++i) {
      int row_tries = 0;
      while (true) {
        Vector v = gaussian_matrix(1, d, rng).row(0).transpose() + pull * pole;
        const double norm = v.norm();
        if (norm > 0.0) {
          v /= norm;
          if (v.dot(pole) > 0.0) {
            x.row(i) = v.transpose();
            break;
          }
        }
        if (++row_tries > 512) {
          row_budget_ok = false;
          break;
        }
      }
    }
    if (!row_budget_ok) continue;

    bool phi_nonneg = true;
    for (Index i = 0; i < n && phi_nonneg; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (x.row(i).dot(x.row(j)) < 0.0) {
          phi_nonneg = false;
          break;
        }
    if (phi_nonneg) return x;
  }
  throw std::runtime_error("sample_hemisphere_rows: retry budget exhausted");
}

Matrix SvdResult::reconstruct() const {
  return U * singular_values.asDiagonal() * V.transpose();
}

SvdResult svd(const Matrix& X) {
  if (!all_finite(X)) throw std::invalid_argument("svd requires finite entries");
  Eigen::JacobiSVD<Matrix> solver(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdResult{solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

double min_singular(const Matrix& X) {
  const auto s = svd(X).singular_values;
  return s(s.size() - 1);
}

double sigma2_over_sigma1(const Matrix& X) {
  const auto s = svd(X).singular_values;
  if (s.size() < 2 || s(0) == 0.0) return 0.0;
  return s(1) / s(0);
}

int numerical_rank(const Matrix& X, double rel_tol) {
  const auto s = svd(X).singular_values;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++rank;
  return rank;
}

double spectral_norm(const Matrix& M) {
  return svd(M).singular_values(0);
}

double spectral_norm_power_iteration(const Matrix& M, int max_iters, double tol) {
  if (M.size() == 0) return 0.0;
  Vector v = Vector::Ones(M.cols());
  // Break symmetry in case the all-ones vector is orthogonal to the top space.
  for (Index i = 0; i < v.size(); ++i) v(i) += 1e-3 * static_cast<double>(i % 7);
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = M.transpose() * (M * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double next = std::sqrt(norm);
    const bool converged = std::abs(next - sigma) <= tol * std::max(1.0, next);
    sigma = next;
    v = w;
    if (converged) break;
  }
  return sigma;
}

bool all_finite(const Matrix& X) { return X.allFinite(); }

bool has_unit_rows(const Matrix& X, double tol) {
  for (Index i = 0; i < X.rows(); ++i)
    if (std::abs(X.row(i).norm() - 1.0) > tol) return false;
  return true;
}

}  // namespace attnlab
