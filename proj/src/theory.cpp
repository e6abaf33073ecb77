#include "attnlab/theory.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace attnlab {

namespace {

constexpr double kBlockSlack = 1e-12;

int radius_or_throw(const MaskGraph& g, const MaskClassification& c, const char* who) {
  if (!c.quasi_strongly_connected) {
    std::ostringstream msg;
    msg << who << ": mask is not quasi-strongly connected";
    throw std::invalid_argument(msg.str());
  }
  (void)g;
  return *c.radius;
}

}  // namespace

double empirical_epsilon(const std::vector<AttentionMatrix>& As, const MaskGraph& g) {
  if (As.empty()) throw std::invalid_argument("empirical_epsilon: empty sequence");
  double eps = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < As.size(); ++t) {
    if (!sparsity_matches(As[t], g)) {
      std::ostringstream msg;
      msg << "empirical_epsilon: sparsity mismatch at layer " << t;
      throw std::invalid_argument(msg.str());
    }
    eps = std::min(eps, min_on_edge(As[t], g));
  }
  return eps;
}

double epsilon_floor(double qk_cap, double temperature, int max_in_degree) {
  if (temperature <= 0.0) throw std::invalid_argument("epsilon_floor: temperature must be positive");
  if (max_in_degree < 1) throw std::invalid_argument("epsilon_floor: degree must be >= 1");
  const double score_bound = qk_cap * qk_cap / std::sqrt(temperature);
  return std::exp(-2.0 * score_bound) / static_cast<double>(max_in_degree);
}

double san_rate(double eps, int r) {
  if (r < 1) throw std::invalid_argument("san_rate: radius must be >= 1");
  if (eps <= 0.0 || std::pow(eps, r) >= 1.0)
    throw std::invalid_argument("san_rate: requires 0 < eps and eps^r < 1");
  return std::pow(1.0 - std::pow(eps, r), 1.0 / r);
}

double ln_rate(double eps, int r, int n_centers) {
  if (r < 1) throw std::invalid_argument("ln_rate: radius must be >= 1");
  if (n_centers < 1) throw std::invalid_argument("ln_rate: n_centers must be >= 1");
  if (eps <= 0.0) throw std::invalid_argument("ln_rate: eps must be positive");
  const double mass = n_centers * std::pow(eps, 2 * r);
  if (mass >= 1.0)
    throw std::invalid_argument("ln_rate: requires n_centers * eps^(2r) < 1");
  return std::pow(1.0 - mass, 1.0 / (2 * r));
}

BoundReport verify_oscillation_contraction(const std::vector<AttentionMatrix>& As,
                                           const MaskGraph& g) {
  const auto c = classify(g);
  const int r = radius_or_throw(g, c, "verify_oscillation_contraction");
  BoundReport report;
  report.theorem = "1";
  report.radius = r;
  report.epsilon = empirical_epsilon(As, g);
  report.factor = 1.0 - std::pow(report.epsilon, r);

  const int T = static_cast<int>(As.size());
  for (int t = 0; t + r <= T; t += r) {
    Matrix block = As[t];
    for (int s = 1; s < r; ++s) block = As[t + s] * block;
    ++report.blocks_checked;
    for (Index j = 0; j < block.cols(); ++j) {
      const double measured = column_oscillation(block.col(j));
      const double allowed = g.n == 1 ? 0.0 : report.factor;
      if (measured > allowed + kBlockSlack)
        report.violations.push_back({t, measured, allowed});
    }
  }
  report.pass = report.violations.empty();
  return report;
}

BoundReport verify_mu_decay(const std::vector<double>& mu_series, const MaskGraph& g,
                            double eps, int burn_in_blocks) {
  const auto c = classify(g);
  const int r = radius_or_throw(g, c, "verify_mu_decay");
  BoundReport report;
  report.theorem = "1";
  report.radius = r;
  report.epsilon = eps;
  report.factor = 1.0 - std::pow(eps, r);
  if (mu_series.empty()) throw std::invalid_argument("verify_mu_decay: empty series");

  const double floor = 1e-13 * std::max(1.0, mu_series.front());
  const int T = static_cast<int>(mu_series.size()) - 1;
  int block_index = 0;
  for (int t = 0; t + r <= T; t += r, ++block_index) {
    if (block_index < burn_in_blocks) continue;
    if (mu_series[t] <= floor) continue;
    ++report.blocks_checked;
    const double measured = mu_series[t + r] / mu_series[t];
    if (measured > report.factor + kBlockSlack)
      report.violations.push_back({t, measured, report.factor});
  }
  // Envelope fitted at t = 0.
  const double rate = report.factor <= 0.0 ? 0.0 : std::pow(report.factor, 1.0 / r);
  const double envelope = mu_series.front() * std::pow(rate, T);
  if (mu_series.back() > envelope * (1.0 + 1e-9) + floor)
    report.violations.push_back({T, mu_series.back(), envelope});
  report.pass = report.violations.empty();
  return report;
}

BoundReport verify_phi_contraction(const std::vector<double>& phi_series,
                                   const std::vector<AttentionMatrix>& As,
                                   const MaskGraph& g, PhiVariant variant) {
  const auto c = classify(g);
  const int r = radius_or_throw(g, c, "verify_phi_contraction");
  if (variant == PhiVariant::strongly_connected && !c.strongly_connected)
    throw std::invalid_argument("verify_phi_contraction: mask is not strongly connected");
  if (phi_series.empty()) throw std::invalid_argument("verify_phi_contraction: empty series");
  if (variant == PhiVariant::quasi_strong && phi_series.front() < 0.0)
    throw std::invalid_argument("verify_phi_contraction: requires phi(0) >= 0");

  BoundReport report;
  report.theorem = variant == PhiVariant::strongly_connected ? "2" : "cor1";
  report.radius = r;
  report.epsilon = empirical_epsilon(As, g);
  const int centers = variant == PhiVariant::strongly_connected ? c.center_count : 1;
  const double mass = centers * std::pow(report.epsilon, 2 * r);
  if (mass >= 1.0)
    throw std::invalid_argument("verify_phi_contraction: n_centers * eps^(2r) must be < 1");
  report.factor = 1.0 - mass;

  int t0 = 0;
  if (variant == PhiVariant::strongly_connected) {
    while (t0 < static_cast<int>(phi_series.size()) && phi_series[t0] < 0.0) ++t0;
    if (t0 == static_cast<int>(phi_series.size())) {
      report.note = "phi never became nonnegative";
      report.pass = false;
      return report;
    }
  }

  const int T = static_cast<int>(phi_series.size()) - 1;
  for (int t = t0; t + r <= T; t += r) {
    ++report.blocks_checked;
    const double measured = 1.0 - phi_series[t + r];
    const double allowed = report.factor * (1.0 - phi_series[t]);
    if (measured > allowed + kBlockSlack)
      report.violations.push_back({t, measured, allowed});
  }
  report.pass = report.violations.empty();
  return report;
}

std::vector<double> ergodicity_gap(const std::vector<AttentionMatrix>& As,
                                   const std::vector<Vector>& Ds) {
  if (As.empty()) return {};
  if (!Ds.empty() && Ds.size() != As.size())
    throw std::invalid_argument("ergodicity_gap: Ds must match As in length");
  const Index n = As.front().rows();
  Matrix P = Matrix::Identity(n, n);
  std::vector<double> gaps;
  gaps.reserve(As.size());
  for (std::size_t t = 0; t < As.size(); ++t) {
    Matrix M = As[t];
    if (!Ds.empty()) M = Ds[t].asDiagonal() * M;
    P = M * P;
    const double norm = P.norm();
    if (norm > 0.0) P /= norm;  // exact for the gap: sigma_2/sigma_1 is scale invariant
    gaps.push_back(sigma2_over_sigma1(P));
  }
  return gaps;
}

Matrix jordan_value_matrix(Index d, int k, double w) {
  if (k < 1 || k > d) throw std::invalid_argument("jordan_value_matrix: requires 1 <= k <= d");
  Matrix m = Matrix::Identity(d, d);
  for (Index i = d - k; i < d - 1; ++i) m(i, i + 1) = w;
  return m;
}

std::vector<std::vector<int>> all_sign_vectors(int k) {
  std::vector<std::vector<int>> out;
  out.reserve(std::size_t{1} << k);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << k); ++bits) {
    std::vector<int> signs(k);
    for (int i = 0; i < k; ++i) signs[i] = (bits >> i) & 1 ? -1 : 1;
    out.push_back(std::move(signs));
  }
  return out;
}

EquilibriumSet construct_equilibrium(int N, int d, int k, double w,
                                     const std::vector<int>& signs, bool full_chain_value) {
  if (N < 1 || d < 1) throw std::invalid_argument("construct_equilibrium: N, d must be >= 1");
  if (k < 1 || k > std::min(N, d))
    throw std::invalid_argument("construct_equilibrium: requires 1 <= k <= min(N, d)");
  if (w <= 1.0) throw std::invalid_argument("construct_equilibrium: w must exceed 1");
  if (static_cast<int>(signs.size()) != k)
    throw std::invalid_argument("construct_equilibrium: need one sign per free coordinate");
  for (int s : signs)
    if (s != 1 && s != -1) throw std::invalid_argument("construct_equilibrium: signs must be +-1");

  const int chain = full_chain_value ? static_cast<int>(d) : k;
  const Matrix W_V = jordan_value_matrix(d, chain, w);

  TokenMatrix X = TokenMatrix::Zero(N, d);
  for (int i = 0; i <= N - k; ++i) X(i, d - 1) = signs[0];

  // X_{i+1} (I - W_V) = (1/beta_i) X_i with beta = 1/(N-k+1) at the constant
  // block and 1 afterwards; the shift determines all but the last coordinate,
  // whose magnitude comes from the unit-norm constraint and whose sign is free.
  double beta_inv = static_cast<double>(N - k + 1);
  for (int step = 1; step < k; ++step) {
    const int row = N - k + step;
    const Vector target = beta_inv * X.row(row - 1).transpose();
    Vector x = Vector::Zero(d);
    for (Index col = d - chain + 1; col < d; ++col) x(col - 1) = -target(col) / w;
    const double rest = 1.0 - x.squaredNorm();
    if (rest < -1e-12) {
      std::ostringstream msg;
      msg << "construct_equilibrium: no unit solution at token " << row + 1
          << " (requires w >= " << beta_inv << ")";
      throw std::invalid_argument(msg.str());
    }
    x(d - 1) = signs[step] * std::sqrt(std::max(rest, 0.0));
    X.row(row) = x.transpose();
    beta_inv = 1.0;
  }

  EquilibriumSet set;
  set.n_tokens = N;
  set.dim = d;
  set.rank = k;
  set.w = w;
  set.signs = signs;
  set.X = X;
  set.W_V = W_V;
  set.residual = fixed_point_residual(X, W_V);
  return set;
}

double fixed_point_residual(const TokenMatrix& X, const Matrix& W_V) {
  if (!has_unit_rows(X, 1e-9))
    throw std::invalid_argument("fixed_point_residual: rows must be unit norm");
  const int N = static_cast<int>(X.rows());
  const Index d = X.cols();
  const MaskGraph g = causal_mask(N);
  const LayerWeights lw{Matrix::Zero(d, d), Matrix::Zero(d, d), W_V, 1.0};
  return (step_post_ln(X, lw, g) - X).norm();
}

Vector recompute_beta(const TokenMatrix& X, const Matrix& W_V) {
  const int N = static_cast<int>(X.rows());
  Vector beta(N);
  Matrix prefix = Matrix::Zero(1, X.cols());
  for (int i = 0; i < N; ++i) {
    prefix += X.row(i) * W_V;
    const double norm = prefix.norm();
    beta(i) = norm == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / norm;
  }
  return beta;
}

double stable_rank_bound(int N, double w) {
  if (w <= 1.0) throw std::invalid_argument("stable_rank_bound: w must exceed 1");
  if (N < 1) throw std::invalid_argument("stable_rank_bound: N must be >= 1");
  return N / (N - (N - 1) / (w * w));
}

double w_for_delta(double delta) {
  if (delta <= 0.0) throw std::invalid_argument("w_for_delta: delta must be positive");
  return std::sqrt(1.0 / delta + 1.0);
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> d2_fixed_points(double w) {
  if (w <= 1.0) throw std::invalid_argument("d2_fixed_points: w must exceed 1");
  const double x = -1.0 / w;
  const double y = std::sqrt(1.0 - 1.0 / (w * w));
  return {Eigen::Vector2d(x, y), Eigen::Vector2d(x, -y)};
}

CounterexampleCheck check_counterexample_conditions(const TokenMatrix& X0, double w) {
  if (w <= 1.0) throw std::invalid_argument("check_counterexample_conditions: w must exceed 1");
  const Index d = X0.cols();
  CounterexampleCheck check;
  if (X0.rows() < 2) {
    check.failures.push_back("needs at least two tokens");
    return check;
  }
  if (!has_unit_rows(X0, 1e-8)) check.failures.push_back("rows must be unit norm");
  // Token 1 must converge to the pole e_d: positive first coordinate, or
  // already sitting at the pole (the limit itself, e.g. a constructed
  // equilibrium).
  Vector pole = Vector::Zero(d);
  pole(d - 1) = 1.0;
  const bool at_pole = (X0.row(0).transpose() - pole).norm() <= 1e-9;
  if (!(X0(0, 0) > 0.0) && !at_pole)
    check.failures.push_back("X_{1,1} must be positive (or token 1 at the pole)");
  for (Index c = 0; c + 2 < d; ++c) {
    if (!(X0(1, c) < 0.0)) {
      std::ostringstream msg;
      msg << "X_{2," << c + 1 << "} must be negative";
      check.failures.push_back(msg.str());
    }
  }
  const double pivot = X0(1, d - 2);
  if (!(pivot <= -1.0 / w)) {
    std::ostringstream msg;
    msg << "X_{2," << d - 1 << "} must be <= -1/w = " << -1.0 / w;
    check.failures.push_back(msg.str());
  }
  double lhs = 0.0;
  if (pivot != 0.0)
    for (Index c = 0; c + 2 < d; ++c) lhs += (X0(1, c) / pivot) * (X0(1, c) / pivot);
  check.ratio_condition_lhs = lhs;
  check.ratio_condition_rhs = std::sqrt(w * w - 1.0);
  if (!(lhs <= check.ratio_condition_rhs))
    check.failures.push_back("leading-coordinate ratio condition violated");
  check.compliant = check.failures.empty();
  return check;
}

TokenMatrix sample_counterexample_x0(int N, int d, double w, Rng& rng) {
  if (N < 2 || d < 2)
    throw std::invalid_argument("sample_counterexample_x0: requires N, d >= 2");
  if (w <= 1.0) throw std::invalid_argument("sample_counterexample_x0: w must exceed 1");

  for (int attempt = 0; attempt < 64; ++attempt) {
    TokenMatrix X = sample_sphere_rows(N, d, rng);

    // Token 1: near the pole e_d with strictly positive leading coordinates
    // in the geometric pattern that keeps its coordinate ratios positive.
    // The offset must be tiny: token 1 approaches the pole only polynomially,
    // and its transit coordinates (which grow like delta * t^j before the
    // normalizer catches up) perturb token 2's invariant region.
    Vector first = Vector::Zero(d);
    const double delta = 1e-16;
    for (Index c = 0; c + 1 < d; ++c) first(c) = delta * std::pow(w, static_cast<double>(c));
    first(d - 1) = 1.0;
    X.row(0) = first.transpose() / first.norm();

    // Token 2: inside the invariant region, leading coordinates large enough
    // that the region's margin dominates token 1's residual transit.
    Vector second = Vector::Zero(d);
    const double pivot = -std::min((1.25 + 0.5 * rng.uniform()) / w, 0.95);
    second(d - 2) = pivot;
    for (Index c = 0; c + 2 < d; ++c) second(c) = -1e-3 * (1.0 + rng.uniform());
    const double rest = 1.0 - second.squaredNorm();
    if (rest <= 0.0) continue;
    second(d - 1) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::sqrt(rest);
    X.row(1) = second.transpose();

    if (check_counterexample_conditions(X, w).compliant) return X;
  }
  throw std::runtime_error("sample_counterexample_x0: retry budget exhausted");
}

}  // namespace attnlab
