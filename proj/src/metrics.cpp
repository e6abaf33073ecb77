#include "attnlab/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "attnlab/numerics.hpp"

namespace attnlab {

namespace {

Matrix normalized_rows_or_throw(const Matrix& X, const char* who) {
  Matrix out = X;
  for (Index i = 0; i < X.rows(); ++i) {
    const double norm = X.row(i).norm();
    if (norm == 0.0) {
      std::ostringstream msg;
      msg << who << ": row " << i + 1 << " is zero";
      throw std::invalid_argument(msg.str());
    }
    out.row(i) /= norm;
  }
  return out;
}

}  // namespace

double min_pairwise_cosine(const Matrix& X) {
  if (X.rows() == 1) return 1.0;
  const Matrix Xn = normalized_rows_or_throw(X, "min_pairwise_cosine");
  double phi = 1.0;
  for (Index i = 0; i < Xn.rows(); ++i)
    for (Index j = i + 1; j < Xn.rows(); ++j)
      phi = std::min(phi, Xn.row(i).dot(Xn.row(j)));
  return phi;
}

double mean_abs_cosine(const Matrix& X) {
  if (X.rows() == 1) return 1.0;
  const Matrix Xn = normalized_rows_or_throw(X, "mean_abs_cosine");
  double sum = 0.0;
  Index pairs = 0;
  for (Index i = 0; i < Xn.rows(); ++i)
    for (Index j = i + 1; j < Xn.rows(); ++j) {
      sum += std::abs(Xn.row(i).dot(Xn.row(j)));
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

double stable_rank(const Matrix& X) {
  const double fro2 = X.squaredNorm();
  if (fro2 == 0.0) throw std::invalid_argument("stable_rank: zero matrix");
  const double top = spectral_norm(X);
  return fro2 / (top * top);
}

MetricsRow compute_metrics(const TokenMatrix& X, double rank_rel_tol) {
  MetricsRow row;
  row.mu = mu(X);

  bool has_zero_row = false;
  for (Index i = 0; i < X.rows(); ++i)
    if (X.row(i).norm() == 0.0) has_zero_row = true;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.phi = has_zero_row ? nan : min_pairwise_cosine(X);
  row.mean_abs_cos = has_zero_row ? nan : mean_abs_cosine(X);

  const auto s = svd(X).singular_values;
  const double sigma1 = s(0);
  row.sigma_min = s(s.size() - 1);
  row.sigma2_over_sigma1 = (s.size() < 2 || sigma1 == 0.0) ? 0.0 : s(1) / sigma1;
  row.stable_rank = sigma1 == 0.0 ? nan : X.squaredNorm() / (sigma1 * sigma1);
  int rank = 0;
  if (sigma1 > 0.0)
    for (Index i = 0; i < s.size(); ++i)
      if (s(i) > rank_rel_tol * sigma1) ++rank;
  row.rank = rank;
  return row;
}

}  // namespace attnlab
