#pragma once

// Attention masks as directed graphs over token indices.
//
// Edge convention (the single most error-prone choice in this code base):
// an edge (j, i) means "token i attends to token j", i.e. j is a direct
// context for i. The in-neighbor set N_i = {k : (k,i) in E} therefore lists
// the tokens i may attend to, and it indexes the nonzero entries of row i of
// the attention matrix. Directed paths run context -> reader, so a center
// node is a token that every other token attends to directly or indirectly.
//
// Nodes are 0-based everywhere in the API; all user-facing I/O (error
// messages, mask files, CLI output) is 1-based.

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace attnlab {

enum class MaskKind {
  complete,
  causal,
  sliding_window,
  unidirectional_sliding_window,
  custom,
};

const char* to_string(MaskKind kind);
std::optional<MaskKind> mask_kind_from_string(const std::string& name);

struct MaskGraph {
  int n = 0;
  /// neighbors[i] = sorted in-neighbor list N_i = {k : (k,i) in E}.
  std::vector<std::vector<int>> neighbors;
  /// All edges as (j, i) pairs, sorted, no duplicates.
  std::vector<std::pair<int, int>> edges;

  bool has_edge(int j, int i) const;
  int max_in_degree() const;
};

MaskGraph complete_mask(int n);
MaskGraph causal_mask(int n);
MaskGraph sliding_window_mask(int n, int width);
MaskGraph unidirectional_window_mask(int n, int width);
/// Edges are 0-based (j, i) pairs; duplicates are collapsed.
MaskGraph custom_mask(int n, std::vector<std::pair<int, int>> edges);

MaskGraph build_mask(MaskKind kind, int n, int width = 1,
                     const std::vector<std::pair<int, int>>& edges = {});

/// Text format: first line "n", then one "j i" pair per line, 1-based.
MaskGraph load_mask_file(const std::string& path);

struct MaskClassification {
  bool has_self_loops = false;  // true iff every node has a self-loop (A1)
  bool strongly_connected = false;
  bool quasi_strongly_connected = false;
  std::vector<int> center_nodes;  // 0-based, sorted
  int center_count = 0;
  std::optional<int> radius;    // present iff quasi-strongly connected
  std::optional<int> diameter;  // present iff strongly connected
};

/// Reachability-based classification. Distances are directed BFS hop counts.
/// radius = min over center nodes of the longest distance from that node.
MaskClassification classify(const MaskGraph& g);

/// Index of the first node without a self-loop, if any.
std::optional<int> first_node_without_self_loop(const MaskGraph& g);

/// Throws std::runtime_error naming the first offending node (1-based).
void assert_a1(const MaskGraph& g);

/// out[j] = {i : (j,i) in E}, the nodes that attend to j.
std::vector<std::vector<int>> out_adjacency(const MaskGraph& g);

}  // namespace attnlab
