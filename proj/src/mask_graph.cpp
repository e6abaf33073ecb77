#include "attnlab/mask_graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace attnlab {

const char* to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::complete: return "complete";
    case MaskKind::causal: return "causal";
    case MaskKind::sliding_window: return "sliding_window";
    case MaskKind::unidirectional_sliding_window: return "unidirectional_sliding_window";
    case MaskKind::custom: return "custom";
  }
  return "unknown";
}

std::optional<MaskKind> mask_kind_from_string(const std::string& name) {
  if (name == "complete") return MaskKind::complete;
  if (name == "causal") return MaskKind::causal;
  if (name == "sliding_window" || name == "window") return MaskKind::sliding_window;
  if (name == "unidirectional_sliding_window" || name == "unidir_window")
    return MaskKind::unidirectional_sliding_window;
  if (name == "custom") return MaskKind::custom;
  return std::nullopt;
}

bool MaskGraph::has_edge(int j, int i) const {
  if (i < 0 || i >= n || j < 0 || j >= n) return false;
  const auto& nb = neighbors[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

int MaskGraph::max_in_degree() const {
  int deg = 0;
  for (const auto& nb : neighbors) deg = std::max(deg, static_cast<int>(nb.size()));
  return deg;
}

namespace {

MaskGraph finalize(int n, std::vector<std::pair<int, int>> edges) {
  if (n < 1) throw std::invalid_argument("mask graph requires n >= 1");
  for (auto [j, i] : edges) {
    if (j < 0 || j >= n || i < 0 || i >= n) {
      std::ostringstream msg;
      msg << "mask edge (" << j + 1 << "," << i + 1 << ") out of range for n=" << n;
      throw std::invalid_argument(msg.str());
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  MaskGraph g;
  g.n = n;
  g.neighbors.assign(n, {});
  for (auto [j, i] : edges) g.neighbors[i].push_back(j);
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  g.edges = std::move(edges);
  return g;
}

}  // namespace

MaskGraph complete_mask(int n) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) edges.emplace_back(j, i);
  return finalize(n, std::move(edges));
}

MaskGraph causal_mask(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) edges.emplace_back(j, i);
  return finalize(n, std::move(edges));
}

MaskGraph sliding_window_mask(int n, int width) {
  if (width < 1) throw std::invalid_argument("sliding window width must be >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - width); j <= std::min(n - 1, i + width); ++j)
      edges.emplace_back(j, i);
  return finalize(n, std::move(edges));
}

MaskGraph unidirectional_window_mask(int n, int width) {
  if (width < 1) throw std::invalid_argument("sliding window width must be >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - width); j <= i; ++j) edges.emplace_back(j, i);
  return finalize(n, std::move(edges));
}

MaskGraph custom_mask(int n, std::vector<std::pair<int, int>> edges) {
  return finalize(n, std::move(edges));
}

MaskGraph build_mask(MaskKind kind, int n, int width,
                     const std::vector<std::pair<int, int>>& edges) {
  switch (kind) {
    case MaskKind::complete: return complete_mask(n);
    case MaskKind::causal: return causal_mask(n);
    case MaskKind::sliding_window: return sliding_window_mask(n, width);
    case MaskKind::unidirectional_sliding_window: return unidirectional_window_mask(n, width);
    case MaskKind::custom: return custom_mask(n, edges);
  }
  throw std::invalid_argument("unknown mask kind");
}

MaskGraph load_mask_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mask file: " + path);
  int n = 0;
  if (!(in >> n)) throw std::runtime_error("mask file missing token count: " + path);
  std::vector<std::pair<int, int>> edges;
  int j = 0, i = 0;
  while (in >> j >> i) edges.emplace_back(j - 1, i - 1);  // file is 1-based
  if (!in.eof()) throw std::runtime_error("malformed edge line in mask file: " + path);
  return custom_mask(n, std::move(edges));
}

std::vector<std::vector<int>> out_adjacency(const MaskGraph& g) {
  std::vector<std::vector<int>> out(g.n);
  for (auto [j, i] : g.edges) out[j].push_back(i);
  return out;
}

namespace {

// BFS hop distances from source along context -> reader edges; -1 = unreachable.
std::vector<int> bfs_distances(const std::vector<std::vector<int>>& out, int source) {
  std::vector<int> dist(out.size(), -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : out[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

MaskClassification classify(const MaskGraph& g) {
  MaskClassification c;
  c.has_self_loops = !first_node_without_self_loop(g).has_value();

  const auto out = out_adjacency(g);
  std::optional<int> radius;
  int diameter = 0;
  for (int v = 0; v < g.n; ++v) {
    const auto dist = bfs_distances(out, v);
    int ecc = 0;
    bool reaches_all = true;
    for (int u = 0; u < g.n; ++u) {
      if (dist[u] < 0) {
        reaches_all = false;
        break;
      }
      ecc = std::max(ecc, dist[u]);
    }
    if (reaches_all) {
      c.center_nodes.push_back(v);
      if (!radius || ecc < *radius) radius = ecc;
      diameter = std::max(diameter, ecc);
    }
  }
  c.center_count = static_cast<int>(c.center_nodes.size());
  c.quasi_strongly_connected = c.center_count > 0;
  c.strongly_connected = c.center_count == g.n;
  c.radius = radius;
  // Max pairwise distance; when every node is a center this is max eccentricity.
  if (c.strongly_connected) c.diameter = diameter;
  return c;
}

std::optional<int> first_node_without_self_loop(const MaskGraph& g) {
  for (int i = 0; i < g.n; ++i)
    if (!g.has_edge(i, i)) return i;
  return std::nullopt;
}

void assert_a1(const MaskGraph& g) {
  if (auto node = first_node_without_self_loop(g)) {
    std::ostringstream msg;
    msg << "A1 violated: node " << *node + 1 << " has no self-loop";
    throw std::runtime_error(msg.str());
  }
}

}  // namespace attnlab
