#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "anfm/rng.hpp"

namespace anfm {

// Undirected edge with u < v. Node ids are dense and zero-based.
struct Edge {
  int u = 0;
  int v = 0;

  Edge() = default;
  Edge(int a, int b) : u(a < b ? a : b), v(a < b ? b : a) {}

  auto operator<=>(const Edge&) const = default;
};

// Immutable simple undirected graph on nodes {0, ..., n-1}.
//
// Edges are stored sorted by (u, v); adjacency lists are sorted by neighbor id.
// Construction rejects self-loops, duplicates and out-of-range endpoints.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n);
  Graph(int n, std::vector<Edge> edges);

  // Builds a graph from a dense row-major 0/1 adjacency matrix (upper triangle is read).
  static Graph from_adjacency(int n, std::span<const std::uint8_t> adjacency);

  int num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int u) const { return adj_[u]; }
  int degree(int u) const { return static_cast<int>(adj_[u].size()); }
  bool has_edge(int u, int v) const;

  // Dense row-major 0/1 adjacency matrix.
  const std::vector<std::uint8_t>& adjacency() const { return dense_; }

  // Relabels node v to perm[v]; perm must be a permutation of 0..n-1.
  Graph relabeled(std::span<const int> perm) const;

  bool operator==(const Graph& other) const { return n_ == other.n_ && edges_ == other.edges_; }

 private:
  void build_index();

  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
  std::vector<std::uint8_t> dense_;
};

// A bijection V -> {0, ..., n-1}. rank[v] is the position of node v.
struct NodeOrdering {
  std::vector<int> rank;

  static NodeOrdering identity(int n);
  static NodeOrdering from_order(std::span<const int> order);

  int size() const { return static_cast<int>(rank.size()); }
  // order()[k] is the node at position k.
  std::vector<int> order() const;
  bool is_permutation() const;
};

// Preorder of a depth-first search from root. Neighbor visit order is shuffled
// with rng so repeated calls produce different orderings. Throws GraphError
// ("graph not connected") for disconnected graphs.
NodeOrdering dfs_ordering(const Graph& g, int root, Rng& rng);

// Line graph: node k corresponds to g.edges()[k]. Throws on an empty edge set.
Graph line_graph(const Graph& g);

bool is_connected(const Graph& g);
std::vector<int> connected_components(const Graph& g, int* num_components = nullptr);
bool is_tree(const Graph& g);

// A tree that becomes a path (possibly empty or a single node) after removing
// all leaves twice.
bool is_lobster(const Graph& g);

// Left-right planarity test.
bool is_planar(const Graph& g);

}  // namespace anfm
