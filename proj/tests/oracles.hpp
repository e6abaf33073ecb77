#pragma once

// Test-only brute-force oracles, deliberately implemented with different
// algorithms than the library paths they check.

#include <limits>
#include <vector>

#include "attnlab/mask_graph.hpp"
#include "attnlab/numerics.hpp"
#include "attnlab/types.hpp"

namespace attnlab::oracle {

inline constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

/// All-pairs directed distances by Floyd-Warshall (the library uses BFS).
inline std::vector<std::vector<int>> fw_distances(const MaskGraph& g) {
  const int n = g.n;
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, kUnreachable));
  for (int v = 0; v < n; ++v) dist[v][v] = 0;
  for (auto [j, i] : g.edges)
    if (j != i) dist[j][i] = 1;
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (dist[a][k] + dist[k][b] < dist[a][b]) dist[a][b] = dist[a][k] + dist[k][b];
  return dist;
}

inline MaskClassification classify_bruteforce(const MaskGraph& g) {
  const auto dist = fw_distances(g);
  const int n = g.n;
  MaskClassification c;
  c.has_self_loops = true;
  for (int v = 0; v < n; ++v)
    if (!g.has_edge(v, v)) c.has_self_loops = false;
  int best_radius = kUnreachable;
  int diameter = 0;
  for (int v = 0; v < n; ++v) {
    int ecc = 0;
    bool center = true;
    for (int u = 0; u < n; ++u) {
      if (dist[v][u] >= kUnreachable) {
        center = false;
        break;
      }
      ecc = std::max(ecc, dist[v][u]);
    }
    if (center) {
      c.center_nodes.push_back(v);
      best_radius = std::min(best_radius, ecc);
      diameter = std::max(diameter, ecc);
    }
  }
  c.center_count = static_cast<int>(c.center_nodes.size());
  c.quasi_strongly_connected = c.center_count > 0;
  c.strongly_connected = c.center_count == n;
  if (c.quasi_strongly_connected) c.radius = best_radius;
  if (c.strongly_connected) c.diameter = diameter;
  return c;
}

inline MaskGraph random_digraph(int n, double edge_prob, Rng& rng, bool force_self_loops) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((force_self_loops && i == j) || rng.uniform() < edge_prob) edges.emplace_back(j, i);
  // classify must handle nodes without in-neighbors; the dynamics never sees
  // such graphs because A1 is asserted there.
  return custom_mask(n, std::move(edges));
}

/// Triple-loop matrix product.
inline Matrix matmul_naive(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = 0; k < a.cols(); ++k)
      for (Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

/// Scores via explicit loops over query/key rows.
inline Matrix raw_scores_naive(const Matrix& X, const Matrix& W_Q, const Matrix& W_K,
                               double temperature) {
  const Matrix q = matmul_naive(X, W_Q);
  const Matrix k = matmul_naive(X, W_K);
  Matrix scores(X.rows(), X.rows());
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.rows(); ++j) {
      double dot = 0.0;
      for (Index c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
      scores(i, j) = dot / std::sqrt(temperature);
    }
  return scores;
}

/// mu through the pairwise-distance identity mu^2 = (1/2N) sum_ij |X_i - X_j|^2.
inline double mu_pairwise(const Matrix& X) {
  const Index n = X.rows();
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) total += (X.row(i) - X.row(j)).squaredNorm();
  return std::sqrt(total / (2.0 * static_cast<double>(n)));
}

}  // namespace attnlab::oracle
