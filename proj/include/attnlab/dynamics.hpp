#pragma once

// Layer update rules for masked self-attention, with and without the
// row-rescaling LayerNorm, plus weight schedules and trajectory execution.
//
// Update rules on an N x d state X, mask graph G, weights (W_Q, W_K, W_V)
// and temperature d_QK:
//   scores   R = X W_Q (X W_K)^T / sqrt(d_QK)
//   san      X' = softmax_G(R) X W_V
//   post_ln  X' = rms_norm(softmax_G(R) X W_V)
//   pre_ln   X' = softmax_G(R) rms_norm(X) W_V   (scores from raw X by
//            default; a flag switches them to the normalized state)

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "attnlab/mask_graph.hpp"
#include "attnlab/metrics.hpp"
#include "attnlab/types.hpp"

namespace attnlab {

struct LayerWeights {
  Matrix W_Q;
  Matrix W_K;
  Matrix W_V;
  double temperature = 1.0;  // d_QK > 0
};

enum class UpdateRule { san, post_ln, pre_ln };

const char* to_string(UpdateRule rule);
std::optional<UpdateRule> update_rule_from_string(const std::string& name);

Matrix raw_scores(const TokenMatrix& X, const LayerWeights& lw);

/// Row-wise softmax restricted to each node's in-neighbor set; off-edge
/// entries are exactly zero. Stabilized by subtracting the per-row maximum
/// over the neighbor set only, so on-edge values are unchanged by the shift.
AttentionMatrix masked_softmax(const Matrix& scores, const MaskGraph& g);

/// Scale every row to unit 2-norm. A zero row is a hard error naming the row;
/// valid dynamics never produce one, so a silent epsilon guard would hide bugs.
TokenMatrix rms_norm(const TokenMatrix& X);

TokenMatrix step_san(const TokenMatrix& X, const LayerWeights& lw, const MaskGraph& g);
TokenMatrix step_post_ln(const TokenMatrix& X, const LayerWeights& lw, const MaskGraph& g);
TokenMatrix step_pre_ln(const TokenMatrix& X, const LayerWeights& lw, const MaskGraph& g,
                        bool attention_from_normalized = false);

/// Smallest attention entry over the edges of g.
double min_on_edge(const AttentionMatrix& A, const MaskGraph& g);
bool is_row_stochastic(const AttentionMatrix& A, double tol = 1e-12);
/// A_ij > 0 iff (j,i) in E.
bool sparsity_matches(const AttentionMatrix& A, const MaskGraph& g);

enum class ScheduleKind {
  constant,
  random_bounded,
  random_orthogonal_value,
  zero_qk_jordan,
};

const char* to_string(ScheduleKind kind);
std::optional<ScheduleKind> schedule_kind_from_string(const std::string& name);

/// Deterministic per-layer weight generator. Random kinds derive layer t from
/// an rng split keyed by t, so layers are reproducible under random access.
class WeightSchedule {
 public:
  /// Fixed weights at every layer.
  static WeightSchedule constant(LayerWeights weights);
  /// W_Q, W_K Gaussian rescaled to spectral norm <= qk_cap (A2); W_V Gaussian
  /// rescaled to spectral norm 1, so running value products stay bounded (A3).
  static WeightSchedule random_bounded(Index d, double qk_cap, double temperature,
                                       std::uint64_t seed);
  /// W_Q, W_K as in random_bounded; W_V Haar orthogonal.
  static WeightSchedule random_orthogonal_value(Index d, double qk_cap, double temperature,
                                                std::uint64_t seed);
  /// Fixed self-favoring scores: W_Q = W_K = sqrt(qk_scale) * I, W_V = I, so
  /// raw scores are qk_scale * <x_i, x_j> / sqrt(d_QK).
  static WeightSchedule constant_self_scores(Index d, double qk_scale, double temperature);
  /// W_Q = W_K = 0; W_V = jordan_value_matrix(d, k, w).
  static WeightSchedule zero_qk_jordan(Index d, int k, double w);

  LayerWeights at(int t) const;
  Index dim() const { return d_; }
  ScheduleKind kind() const { return kind_; }
  double qk_cap() const { return qk_cap_; }
  double temperature() const { return temperature_; }
  bool value_matrices_orthogonal() const;
  bool zero_qk() const;

 private:
  WeightSchedule() = default;

  ScheduleKind kind_ = ScheduleKind::constant;
  Index d_ = 0;
  double qk_cap_ = 0.0;
  double temperature_ = 1.0;
  std::uint64_t seed_ = 0;
  LayerWeights constant_weights_;
};

/// max over layers of max(||W_Q||_2, ||W_K||_2); the A2 witness.
double max_qk_spectral_norm(const WeightSchedule& schedule, int T);
/// max over t of ||W_V^(0) ... W_V^(t)||_2 via power iteration on the
/// accumulated product; the A3 witness.
double max_value_product_norm(const WeightSchedule& schedule, int T);

struct RecordPlan {
  int snapshot_stride = 0;            // 0 = no periodic snapshots
  std::vector<int> snapshot_steps;    // explicit snapshot steps
  bool record_attention = false;      // keep every A^(t)
  bool record_ln_scalings = false;    // keep post-LN diag(D^(t)) entries
};

struct TrajectoryRecord {
  std::vector<MetricsRow> metrics;          // size T+1; metrics[t] = state after t steps
  std::vector<double> eps_per_layer;        // size T; min on-edge entry of A^(t)
  std::vector<AttentionMatrix> attention;   // size T when recorded
  std::vector<Vector> ln_scalings;          // size T when recorded (post_ln only)
  std::vector<std::pair<int, TokenMatrix>> snapshots;
  TokenMatrix final_state;

  std::vector<double> mu_series() const;
  std::vector<double> phi_series() const;
};

struct TrajectoryError : std::runtime_error {
  TrajectoryError(int step_, const std::string& what_)
      : std::runtime_error("step " + std::to_string(step_) + ": " + what_), step(step_) {}
  int step;
};

struct TrajectoryOptions {
  bool pre_ln_attention_from_normalized = false;
};

/// Run T layers from X0 and record metrics of the state after each full step.
TrajectoryRecord run_trajectory(const TokenMatrix& X0, const WeightSchedule& schedule,
                                const MaskGraph& g, UpdateRule rule, int T,
                                const RecordPlan& plan = {},
                                const TrajectoryOptions& options = {});

}  // namespace attnlab
