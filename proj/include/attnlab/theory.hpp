#pragma once

// Collapse-bound parameters, contraction verifiers along trajectories, and
// the rank-k equilibria of the LayerNorm dynamics under the causal mask.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "attnlab/dynamics.hpp"
#include "attnlab/mask_graph.hpp"
#include "attnlab/numerics.hpp"
#include "attnlab/types.hpp"

namespace attnlab {

struct BoundViolation {
  int step = 0;
  double measured = 0.0;
  double allowed = 0.0;
};

struct BoundReport {
  std::string theorem;
  double epsilon = 0.0;
  int radius = 0;
  double factor = 0.0;  // per-block contraction allowance
  std::vector<BoundViolation> violations;
  bool pass = false;
  int blocks_checked = 0;
  std::string note;
};

/// Minimum over layers and edges (j,i) of A^(t)_{ij}. Every A must have the
/// sparsity pattern of g.
double empirical_epsilon(const std::vector<AttentionMatrix>& As, const MaskGraph& g);

/// Analytic floor for on-edge attention entries when row norms are <= 1 and
/// max(||W_Q||, ||W_K||) <= qk_cap: scores lie in [-c, c] with
/// c = qk_cap^2/sqrt(d_QK), so every on-edge entry is at least
/// exp(-2c)/max_in_degree.
double epsilon_floor(double qk_cap, double temperature, int max_in_degree);

/// Per-step contraction factor (1 - eps^r)^{1/r} of the no-LayerNorm bound.
double san_rate(double eps, int r);
/// Per-step factor (1 - n_centers * eps^{2r})^{1/(2r)} of the LayerNorm bound;
/// n_centers = N for strongly connected masks, 1 for the quasi-strong variant.
double ln_rate(double eps, int r, int n_centers);

/// Checks, per disjoint r-block and basis vector e_j, that the block product
/// B = A^(t+r-1) ... A^(t) contracts the oscillation:
/// osc(B e_j) <= (1 - eps^r) * osc(e_j), with eps measured from the sequence.
BoundReport verify_oscillation_contraction(const std::vector<AttentionMatrix>& As,
                                           const MaskGraph& g);

/// Per-block decay of mu against the (1 - eps^r) allowance plus the envelope
/// mu(T) <= mu(0) * rate^T. Blocks below the numerical floor are skipped and
/// the first burn_in_blocks are exempt (the bound is asymptotic).
BoundReport verify_mu_decay(const std::vector<double>& mu_series, const MaskGraph& g,
                            double eps, int burn_in_blocks = 1);

enum class PhiVariant {
  strongly_connected,  // factor 1 - n_centers * eps^{2r}, blocks once phi >= 0
  quasi_strong,        // factor 1 - eps^{2r}, requires phi(0) >= 0, blocks from 0
};

/// Per-r-block check of 1 - phi(t+r) <= factor * (1 - phi(t)).
/// Hypothesis violations (mask connectivity, phi(0) sign) throw.
BoundReport verify_phi_contraction(const std::vector<double>& phi_series,
                                   const std::vector<AttentionMatrix>& As,
                                   const MaskGraph& g, PhiVariant variant);

/// sigma_2/sigma_1 of the running products P^(t) = D^(t)A^(t) ... D^(0)A^(0),
/// renormalized by Frobenius norm every step (the ratio is scale invariant).
/// Empty Ds means D = I throughout.
std::vector<double> ergodicity_gap(const std::vector<AttentionMatrix>& As,
                                   const std::vector<Vector>& Ds = {});

/// Identity with a k x k upper-bidiagonal block (diagonal 1, superdiagonal w)
/// in the trailing coordinates; k = 1 gives the identity.
Matrix jordan_value_matrix(Index d, int k, double w);

struct EquilibriumSet {
  int n_tokens = 0;
  int dim = 0;
  int rank = 0;
  double w = 0.0;
  std::vector<int> signs;  // one +-1 per free coordinate, size rank
  TokenMatrix X;
  Matrix W_V;  // value matrix the fixed point was validated against
  double residual = 0.0;
};

/// Fixed point of the zero-QK causal LayerNorm dynamics with rank exactly k.
/// Leading N-k+1 tokens are (0,...,0,s_1); each later token solves
/// X_{i+1}(I - W_V) = scaled predecessor, with signs choosing the square-root
/// branch of the one free coordinate. full_chain_value pairs the point with
/// the length-d chain matrix (under which equilibria of every rank coexist)
/// instead of the trailing-k one.
EquilibriumSet construct_equilibrium(int N, int d, int k, double w,
                                     const std::vector<int>& signs,
                                     bool full_chain_value = true);

/// All 2^k sign choices for a given rank.
std::vector<std::vector<int>> all_sign_vectors(int k);

/// ||step_post_ln(X) - X||_F under zero-QK weights with the given W_V and the
/// causal mask.
double fixed_point_residual(const TokenMatrix& X, const Matrix& W_V);

/// Recompute the per-token scalings beta_i = 1/||sum_{j<=i} X_j W_V||_2 from
/// the state; at a valid equilibrium beta_{N-k+1} = 1/(N-k+1) and later ones
/// are 1.
Vector recompute_beta(const TokenMatrix& X, const Matrix& W_V);

/// Anisotropy bound N / (N - (N-1)/w^2) for full-rank equilibria.
double stable_rank_bound(int N, double w);
/// Smallest w with stable_rank_bound <= roughly 1 + delta: sqrt(1/delta + 1).
double w_for_delta(double delta);

/// The two unit fixed points of the d=2 second-token map:
/// A = (-1/w, +sqrt(1 - 1/w^2)), B = (-1/w, -sqrt(1 - 1/w^2)).
std::pair<Eigen::Vector2d, Eigen::Vector2d> d2_fixed_points(double w);

struct CounterexampleCheck {
  bool compliant = false;
  std::vector<std::string> failures;
  double ratio_condition_lhs = 0.0;
  double ratio_condition_rhs = 0.0;
};

/// Conditions under which the second coordinate block of token 2 stays in the
/// invariant region X_{2,d-1} <= -1/w of the zero-QK causal chain dynamics:
/// unit rows, X_{1,1} > 0, X_{2,i} < 0 for i in [d-2], X_{2,d-1} <= -1/w, and
/// sum_{i<=d-2} (X_{2,i}/X_{2,d-1})^2 <= sqrt(w^2 - 1).
CounterexampleCheck check_counterexample_conditions(const TokenMatrix& X0, double w);

/// Draws a compliant initial state: token 1 near the pole with positive
/// leading coordinates, token 2 inside the invariant region, remaining tokens
/// uniform on the sphere.
TokenMatrix sample_counterexample_x0(int N, int d, double w, Rng& rng);

}  // namespace attnlab
