#include "attnlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "attnlab/numerics.hpp"
#include "attnlab/theory.hpp"

namespace attnlab {

const char* to_string(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::san: return "san";
    case UpdateRule::post_ln: return "post_ln";
    case UpdateRule::pre_ln: return "pre_ln";
  }
  return "unknown";
}

std::optional<UpdateRule> update_rule_from_string(const std::string& name) {
  if (name == "san") return UpdateRule::san;
  if (name == "post_ln") return UpdateRule::post_ln;
  if (name == "pre_ln") return UpdateRule::pre_ln;
  return std::nullopt;
}

Matrix raw_scores(const TokenMatrix& X, const LayerWeights& lw) {
  if (lw.temperature <= 0.0)
    throw std::invalid_argument("raw_scores: temperature must be positive");
  if (X.cols() != lw.W_Q.rows() || X.cols() != lw.W_K.rows())
    throw std::invalid_argument("raw_scores: weight shapes incompatible with state");
  const Matrix q = X * lw.W_Q;
  const Matrix k = X * lw.W_K;
  return q * k.transpose() / std::sqrt(lw.temperature);
}

AttentionMatrix masked_softmax(const Matrix& scores, const MaskGraph& g) {
  const Index n = scores.rows();
  if (scores.cols() != n || n != g.n)
    throw std::invalid_argument("masked_softmax: scores must be n x n for the mask");
  AttentionMatrix A = AttentionMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& nb = g.neighbors[i];
    if (nb.empty()) {
      std::ostringstream msg;
      msg << "masked_softmax: node " << i + 1 << " has no in-neighbors";
      throw std::invalid_argument(msg.str());
    }
    double row_max = scores(i, nb[0]);
    for (int j : nb) row_max = std::max(row_max, scores(i, j));
    double denom = 0.0;
    for (int j : nb) {
      const double e = std::exp(scores(i, j) - row_max);
      A(i, j) = e;
      denom += e;
    }
    for (int j : nb) A(i, j) /= denom;
  }
  return A;
}

TokenMatrix rms_norm(const TokenMatrix& X) {
  TokenMatrix out = X;
  for (Index i = 0; i < X.rows(); ++i) {
    const double norm = X.row(i).norm();
    if (norm == 0.0) {
      std::ostringstream msg;
      msg << "rms_norm: row " << i + 1 << " is zero";
      throw std::invalid_argument(msg.str());
    }
    out.row(i) /= norm;
  }
  return out;
}

TokenMatrix step_san(const TokenMatrix& X, const LayerWeights& lw, const MaskGraph& g) {
  const AttentionMatrix A = masked_softmax(raw_scores(X, lw), g);
  return A * X * lw.W_V;
}

TokenMatrix step_post_ln(const TokenMatrix& X, const LayerWeights& lw, const MaskGraph& g) {
  return rms_norm(step_san(X, lw, g));
}

TokenMatrix step_pre_ln(const TokenMatrix& X, const LayerWeights& lw, const MaskGraph& g,
                        bool attention_from_normalized) {
  const TokenMatrix Xn = rms_norm(X);
  const Matrix scores = raw_scores(attention_from_normalized ? Xn : X, lw);
  return masked_softmax(scores, g) * Xn * lw.W_V;
}

double min_on_edge(const AttentionMatrix& A, const MaskGraph& g) {
  double eps = std::numeric_limits<double>::infinity();
  for (auto [j, i] : g.edges) eps = std::min(eps, A(i, j));
  return eps;
}

bool is_row_stochastic(const AttentionMatrix& A, double tol) {
  if (A.minCoeff() < 0.0) return false;
  for (Index i = 0; i < A.rows(); ++i)
    if (std::abs(A.row(i).sum() - 1.0) > tol) return false;
  return true;
}

bool sparsity_matches(const AttentionMatrix& A, const MaskGraph& g) {
  if (A.rows() != g.n || A.cols() != g.n) return false;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) {
      const bool edge = g.has_edge(static_cast<int>(j), static_cast<int>(i));
      if (edge != (A(i, j) > 0.0)) return false;
    }
  return true;
}

const char* to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::random_bounded: return "random_bounded";
    case ScheduleKind::random_orthogonal_value: return "random_orthogonal_value";
    case ScheduleKind::zero_qk_jordan: return "zero_qk_jordan";
  }
  return "unknown";
}

std::optional<ScheduleKind> schedule_kind_from_string(const std::string& name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "random_bounded") return ScheduleKind::random_bounded;
  if (name == "random_orthogonal_value") return ScheduleKind::random_orthogonal_value;
  if (name == "zero_qk_jordan") return ScheduleKind::zero_qk_jordan;
  return std::nullopt;
}

WeightSchedule WeightSchedule::constant(LayerWeights weights) {
  WeightSchedule s;
  s.kind_ = ScheduleKind::constant;
  s.d_ = weights.W_V.rows();
  s.temperature_ = weights.temperature;
  s.qk_cap_ = std::max(spectral_norm(weights.W_Q), spectral_norm(weights.W_K));
  s.constant_weights_ = std::move(weights);
  return s;
}

WeightSchedule WeightSchedule::random_bounded(Index d, double qk_cap, double temperature,
                                              std::uint64_t seed) {
  if (qk_cap <= 0.0) throw std::invalid_argument("random_bounded: qk_cap must be positive");
  WeightSchedule s;
  s.kind_ = ScheduleKind::random_bounded;
  s.d_ = d;
  s.qk_cap_ = qk_cap;
  s.temperature_ = temperature;
  s.seed_ = seed;
  return s;
}

WeightSchedule WeightSchedule::random_orthogonal_value(Index d, double qk_cap,
                                                       double temperature,
                                                       std::uint64_t seed) {
  WeightSchedule s = random_bounded(d, qk_cap, temperature, seed);
  s.kind_ = ScheduleKind::random_orthogonal_value;
  return s;
}

WeightSchedule WeightSchedule::constant_self_scores(Index d, double qk_scale,
                                                    double temperature) {
  if (qk_scale < 0.0)
    throw std::invalid_argument("constant_self_scores: qk_scale must be nonnegative");
  const double root = std::sqrt(qk_scale);
  return constant(LayerWeights{root * Matrix::Identity(d, d),
                               root * Matrix::Identity(d, d), Matrix::Identity(d, d),
                               temperature});
}

WeightSchedule WeightSchedule::zero_qk_jordan(Index d, int k, double w) {
  WeightSchedule s;
  s.kind_ = ScheduleKind::zero_qk_jordan;
  s.d_ = d;
  s.qk_cap_ = 0.0;
  s.temperature_ = 1.0;
  s.constant_weights_ =
      LayerWeights{Matrix::Zero(d, d), Matrix::Zero(d, d), jordan_value_matrix(d, k, w), 1.0};
  return s;
}

namespace {

// Gaussian rescaled to spectral norm exactly cap, so A2 holds with equality.
Matrix capped_gaussian(Index d, double cap, Rng& rng) {
  Matrix m = gaussian_matrix(d, d, rng);
  const double top = spectral_norm(m);
  if (top > 0.0) m *= cap / top;
  return m;
}

}  // namespace

LayerWeights WeightSchedule::at(int t) const {
  if (t < 0) throw std::invalid_argument("schedule index must be nonnegative");
  switch (kind_) {
    case ScheduleKind::constant:
    case ScheduleKind::zero_qk_jordan:
      return constant_weights_;
    case ScheduleKind::random_bounded:
    case ScheduleKind::random_orthogonal_value: {
      Rng layer_rng = Rng(seed_).split(static_cast<std::uint64_t>(t));
      LayerWeights lw;
      lw.W_Q = capped_gaussian(d_, qk_cap_, layer_rng);
      lw.W_K = capped_gaussian(d_, qk_cap_, layer_rng);
      if (kind_ == ScheduleKind::random_orthogonal_value) {
        lw.W_V = random_orthogonal(d_, layer_rng);
      } else {
        Matrix v = gaussian_matrix(d_, d_, layer_rng);
        lw.W_V = v / spectral_norm(v);
      }
      lw.temperature = temperature_;
      return lw;
    }
  }
  throw std::logic_error("unreachable schedule kind");
}

bool WeightSchedule::value_matrices_orthogonal() const {
  if (kind_ == ScheduleKind::random_orthogonal_value) return true;
  if (kind_ == ScheduleKind::constant || kind_ == ScheduleKind::zero_qk_jordan) {
    const Matrix& v = constant_weights_.W_V;
    return (v.transpose() * v - Matrix::Identity(v.rows(), v.cols())).norm() < 1e-10;
  }
  return false;
}

bool WeightSchedule::zero_qk() const {
  if (kind_ == ScheduleKind::constant || kind_ == ScheduleKind::zero_qk_jordan)
    return constant_weights_.W_Q.isZero(0.0) && constant_weights_.W_K.isZero(0.0);
  return false;
}

double max_qk_spectral_norm(const WeightSchedule& schedule, int T) {
  double worst = 0.0;
  for (int t = 0; t < T; ++t) {
    const LayerWeights lw = schedule.at(t);
    worst = std::max({worst, spectral_norm(lw.W_Q), spectral_norm(lw.W_K)});
  }
  return worst;
}

double max_value_product_norm(const WeightSchedule& schedule, int T) {
  Matrix product = Matrix::Identity(schedule.dim(), schedule.dim());
  double worst = 0.0;
  for (int t = 0; t < T; ++t) {
    product = product * schedule.at(t).W_V;
    worst = std::max(worst, spectral_norm_power_iteration(product));
  }
  return worst;
}

std::vector<double> TrajectoryRecord::mu_series() const {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const auto& row : metrics) out.push_back(row.mu);
  return out;
}

std::vector<double> TrajectoryRecord::phi_series() const {
  std::vector<double> out;
  out.reserve(metrics.size());
  for (const auto& row : metrics) out.push_back(row.phi);
  return out;
}

TrajectoryRecord run_trajectory(const TokenMatrix& X0, const WeightSchedule& schedule,
                                const MaskGraph& g, UpdateRule rule, int T,
                                const RecordPlan& plan, const TrajectoryOptions& options) {
  if (T < 0) throw std::invalid_argument("run_trajectory: T must be nonnegative");
  if (X0.rows() != g.n)
    throw std::invalid_argument("run_trajectory: state rows must match mask size");
  assert_a1(g);

  auto wants_snapshot = [&plan](int t) {
    if (plan.snapshot_stride > 0 && t % plan.snapshot_stride == 0) return true;
    return std::find(plan.snapshot_steps.begin(), plan.snapshot_steps.end(), t) !=
           plan.snapshot_steps.end();
  };

  TrajectoryRecord record;
  record.metrics.reserve(T + 1);
  record.eps_per_layer.reserve(T);

  TokenMatrix X = X0;
  record.metrics.push_back(compute_metrics(X));
  if (wants_snapshot(0)) record.snapshots.emplace_back(0, X);

  for (int t = 0; t < T; ++t) {
    try {
      const LayerWeights lw = schedule.at(t);
      const TokenMatrix& score_state =
          (rule == UpdateRule::pre_ln && options.pre_ln_attention_from_normalized)
              ? rms_norm(X)
              : X;
      const AttentionMatrix A = masked_softmax(raw_scores(score_state, lw), g);
      record.eps_per_layer.push_back(min_on_edge(A, g));
      if (plan.record_attention) record.attention.push_back(A);

      switch (rule) {
        case UpdateRule::san:
          X = A * X * lw.W_V;
          break;
        case UpdateRule::post_ln: {
          const TokenMatrix pre = A * X * lw.W_V;
          if (plan.record_ln_scalings) {
            Vector D(pre.rows());
            for (Index i = 0; i < pre.rows(); ++i) {
              const double norm = pre.row(i).norm();
              D(i) = norm == 0.0 ? 0.0 : 1.0 / norm;
            }
            record.ln_scalings.push_back(D);
          }
          X = rms_norm(pre);
          break;
        }
        case UpdateRule::pre_ln:
          X = A * rms_norm(X) * lw.W_V;
          break;
      }
    } catch (const std::invalid_argument& e) {
      throw TrajectoryError(t, e.what());
    }
    record.metrics.push_back(compute_metrics(X));
    if (wants_snapshot(t + 1)) record.snapshots.emplace_back(t + 1, X);
  }
  record.final_state = std::move(X);
  return record;
}

}  // namespace attnlab
