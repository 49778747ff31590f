#include "anfm/graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "anfm/errors.hpp"

namespace anfm {

Graph::Graph(int n) : n_(n) {
  if (n < 0) throw GraphError("negative node count");
  build_index();
}

Graph::Graph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  if (n < 0) throw GraphError("negative node count");
  for (const Edge& e : edges_) {
    if (e.u == e.v) throw GraphError("self-loop on node " + std::to_string(e.u));
    if (e.u < 0 || e.v >= n) {
      throw GraphError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw GraphError("duplicate edge");
  }
  build_index();
}

Graph Graph::from_adjacency(int n, std::span<const std::uint8_t> adjacency) {
  if (adjacency.size() != static_cast<std::size_t>(n) * n) throw GraphError("adjacency size mismatch");
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (adjacency[static_cast<std::size_t>(i) * n + j]) edges.emplace_back(i, j);
    }
  }
  return Graph(n, std::move(edges));
}

void Graph::build_index() {
  adj_.assign(n_, {});
  dense_.assign(static_cast<std::size_t>(n_) * n_, 0);
  for (const Edge& e : edges_) {
    adj_[e.u].push_back(e.v);
    adj_[e.v].push_back(e.u);
    dense_[static_cast<std::size_t>(e.u) * n_ + e.v] = 1;
    dense_[static_cast<std::size_t>(e.v) * n_ + e.u] = 1;
  }
  for (auto& a : adj_) std::sort(a.begin(), a.end());
}

bool Graph::has_edge(int u, int v) const {
  if (u < 0 || v < 0 || u >= n_ || v >= n_) return false;
  return dense_[static_cast<std::size_t>(u) * n_ + v] != 0;
}

Graph Graph::relabeled(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != n_) throw GraphError("permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const Edge& e : edges_) edges.emplace_back(perm[e.u], perm[e.v]);
  return Graph(n_, std::move(edges));
}

NodeOrdering NodeOrdering::identity(int n) {
  NodeOrdering o;
  o.rank.resize(n);
  std::iota(o.rank.begin(), o.rank.end(), 0);
  return o;
}

NodeOrdering NodeOrdering::from_order(std::span<const int> order) {
  NodeOrdering o;
  o.rank.assign(order.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) o.rank.at(order[k]) = static_cast<int>(k);
  return o;
}

std::vector<int> NodeOrdering::order() const {
  std::vector<int> out(rank.size());
  for (std::size_t v = 0; v < rank.size(); ++v) out[rank[v]] = static_cast<int>(v);
  return out;
}

bool NodeOrdering::is_permutation() const {
  std::vector<char> seen(rank.size(), 0);
  for (int r : rank) {
    if (r < 0 || r >= size() || seen[r]) return false;
    seen[r] = 1;
  }
  return true;
}

NodeOrdering dfs_ordering(const Graph& g, int root, Rng& rng) {
  const int n = g.num_nodes();
  if (root < 0 || root >= n) throw GraphError("DFS root out of range");
  if (!is_connected(g)) throw GraphError("graph not connected");

  std::vector<int> order;
  order.reserve(n);
  std::vector<char> visited(n, 0);
  // Each frame holds a shuffled neighbor list and a cursor, mirroring recursion.
  struct Frame {
    std::vector<int> nbrs;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  auto enter = [&](int v) {
    visited[v] = 1;
    order.push_back(v);
    Frame f{g.neighbors(v), 0};
    std::shuffle(f.nbrs.begin(), f.nbrs.end(), rng);
    stack.push_back(std::move(f));
  };
  enter(root);
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next == top.nbrs.size()) {
      stack.pop_back();
      continue;
    }
    int w = top.nbrs[top.next++];
    if (!visited[w]) enter(w);
  }
  return NodeOrdering::from_order(order);
}

Graph line_graph(const Graph& g) {
  const auto& edges = g.edges();
  if (edges.empty()) throw GraphError("line graph of an empty edge set");
  // incident[v] lists indices of edges touching v.
  std::vector<std::vector<int>> incident(g.num_nodes());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    incident[edges[k].u].push_back(static_cast<int>(k));
    incident[edges[k].v].push_back(static_cast<int>(k));
  }
  std::vector<Edge> out;
  for (const auto& inc : incident) {
    for (std::size_t a = 0; a < inc.size(); ++a) {
      for (std::size_t b = a + 1; b < inc.size(); ++b) out.emplace_back(inc[a], inc[b]);
    }
  }
  // Two distinct edges of a simple graph share at most one endpoint, so no duplicates.
  return Graph(static_cast<int>(edges.size()), std::move(out));
}

std::vector<int> connected_components(const Graph& g, int* num_components) {
  const int n = g.num_nodes();
  std::vector<int> comp(n, -1);
  int count = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : g.neighbors(v)) {
        if (comp[w] < 0) {
          comp[w] = count;
          stack.push_back(w);
        }
      }
    }
    ++count;
  }
  if (num_components) *num_components = count;
  return comp;
}

bool is_connected(const Graph& g) {
  if (g.num_nodes() == 0) return false;
  int count = 0;
  connected_components(g, &count);
  return count == 1;
}

bool is_tree(const Graph& g) {
  return g.num_nodes() > 0 && g.num_edges() + 1 == static_cast<std::size_t>(g.num_nodes()) && is_connected(g);
}

bool is_lobster(const Graph& g) {
  if (!is_tree(g)) return false;
  const int n = g.num_nodes();
  std::vector<char> alive(n, 1);
  std::vector<int> deg(n);
  for (int v = 0; v < n; ++v) deg[v] = g.degree(v);
  for (int round = 0; round < 2; ++round) {
    std::vector<int> leaves;
    for (int v = 0; v < n; ++v) {
      if (alive[v] && deg[v] == 1) leaves.push_back(v);
    }
    for (int v : leaves) alive[v] = 0;
    for (int v : leaves) {
      for (int w : g.neighbors(v)) {
        if (alive[w]) --deg[w];
      }
    }
  }
  int remaining = 0, ones = 0, twos = 0;
  for (int v = 0; v < n; ++v) {
    if (!alive[v]) continue;
    ++remaining;
    if (deg[v] == 1) ++ones;
    if (deg[v] == 2) ++twos;
  }
  // The remainder of a tree after leaf removal is a tree: it is a path iff it
  // has two endpoints and only degree-2 interior nodes, or at most one node.
  if (ones == 2 && twos == remaining - 2) return true;
  return ones == 0 && twos == 0 && remaining <= 1;
}

}  // namespace anfm
