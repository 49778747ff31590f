#include <gtest/gtest.h>

#include "anfm/delaunay.hpp"
#include "anfm/errors.hpp"
#include "anfm/graph.hpp"
#include "anfm/wl_hash.hpp"
#include "support.hpp"

using namespace anfm;
using namespace anfm::testing;

TEST(Graph, NormalizesAndSortsEdges) {
  Graph g(4, {{3, 1}, {0, 2}, {1, 0}});
  ASSERT_EQ(g.num_edges(), 3u);
  EXPECT_EQ(g.edges()[0], Edge(0, 1));
  EXPECT_EQ(g.edges()[1], Edge(0, 2));
  EXPECT_EQ(g.edges()[2], Edge(1, 3));
  EXPECT_TRUE(g.has_edge(3, 1));
  EXPECT_FALSE(g.has_edge(2, 3));
  EXPECT_EQ(g.degree(1), 2);
}

TEST(Graph, RejectsBadEdges) {
  EXPECT_THROW(Graph(3, {{0, 0}}), GraphError);
  EXPECT_THROW(Graph(3, {{0, 1}, {1, 0}}), GraphError);
  EXPECT_THROW(Graph(3, {{0, 3}}), GraphError);
}

TEST(Graph, AdjacencyRoundTrip) {
  Rng rng(3);
  Graph g = random_connected(9, 0.3, rng);
  EXPECT_EQ(Graph::from_adjacency(9, g.adjacency()), g);
}

TEST(Graph, RelabelPreservesStructure) {
  Rng rng(5);
  Graph g = random_connected(10, 0.2, rng);
  auto perm = random_permutation(10, rng);
  Graph h = g.relabeled(perm);
  ASSERT_EQ(h.num_edges(), g.num_edges());
  for (const Edge& e : g.edges()) EXPECT_TRUE(h.has_edge(perm[e.u], perm[e.v]));
}

TEST(Graph, DfsOrderingIsConnectedPreorder) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = random_connected(12, 0.15, rng);
    NodeOrdering ord = dfs_ordering(g, trial % 12, rng);
    ASSERT_TRUE(ord.is_permutation());
    EXPECT_EQ(ord.rank[trial % 12], 0);
    auto order = ord.order();
    for (int k = 1; k < 12; ++k) {
      bool attached = false;
      for (int nb : g.neighbors(order[k])) attached |= ord.rank[nb] < k;
      EXPECT_TRUE(attached);
    }
  }
  Graph split(4, {{0, 1}, {2, 3}});
  EXPECT_THROW(dfs_ordering(split, 0, rng), GraphError);
}

TEST(Graph, LineGraph) {
  Graph star(4, {{0, 1}, {0, 2}, {0, 3}});
  Graph l = line_graph(star);
  EXPECT_EQ(l.num_nodes(), 3);
  EXPECT_EQ(l.num_edges(), 3u);
  Graph p = line_graph(path_graph(5));
  EXPECT_EQ(p, path_graph(4));
}

TEST(Graph, TreeAndLobster) {
  EXPECT_TRUE(is_tree(path_graph(6)));
  EXPECT_FALSE(is_tree(cycle_graph(6)));
  // Caterpillar with second-level leaves.
  Graph lob(8, {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {2, 5}, {5, 6}, {0, 7}});
  EXPECT_TRUE(is_lobster(lob));
  // Spider with three legs of length 3 is not a lobster.
  Graph spider(10, {{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {5, 6}, {0, 7}, {7, 8}, {8, 9}});
  EXPECT_TRUE(is_tree(spider));
  EXPECT_FALSE(is_lobster(spider));
}

TEST(Graph, Components) {
  Graph g(6, {{0, 1}, {2, 3}, {3, 4}});
  int count = 0;
  auto labels = connected_components(g, &count);
  EXPECT_EQ(count, 3);
  EXPECT_EQ(labels[0], labels[1]);
  EXPECT_EQ(labels[2], labels[4]);
  EXPECT_NE(labels[0], labels[5]);
  EXPECT_FALSE(is_connected(g));
}

namespace {

Graph grid(int r, int c) {
  std::vector<Edge> e;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      if (j + 1 < c) e.emplace_back(i * c + j, i * c + j + 1);
      if (i + 1 < r) e.emplace_back(i * c + j, (i + 1) * c + j);
    }
  return Graph(r * c, e);
}

Graph subdivide(const Graph& g) {
  std::vector<Edge> e;
  int next = g.num_nodes();
  for (const Edge& x : g.edges()) {
    e.emplace_back(x.u, next);
    e.emplace_back(next, x.v);
    ++next;
  }
  return Graph(next, e);
}

Graph k33() {
  std::vector<Edge> e;
  for (int i = 0; i < 3; ++i)
    for (int j = 3; j < 6; ++j) e.emplace_back(i, j);
  return Graph(6, e);
}

Graph petersen() {
  std::vector<Edge> e;
  for (int i = 0; i < 5; ++i) {
    e.emplace_back(i, (i + 1) % 5);
    e.emplace_back(i, i + 5);
    e.emplace_back(5 + i, 5 + (i + 2) % 5);
  }
  return Graph(10, e);
}

}  // namespace

TEST(Planarity, KnownFamilies) {
  EXPECT_TRUE(is_planar(complete_graph(4)));
  EXPECT_FALSE(is_planar(complete_graph(5)));
  EXPECT_FALSE(is_planar(k33()));
  EXPECT_FALSE(is_planar(petersen()));
  EXPECT_FALSE(is_planar(subdivide(complete_graph(5))));
  EXPECT_FALSE(is_planar(subdivide(k33())));
  EXPECT_TRUE(is_planar(grid(6, 7)));
  EXPECT_TRUE(is_planar(cycle_graph(9)));
  EXPECT_TRUE(is_planar(Graph(3)));
}

TEST(Planarity, DelaunayTriangulationsArePlanarAndMaximalChordsBreakThem) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point2> pts(30);
    for (auto& p : pts) p = {u(rng), u(rng)};
    Graph g(30, delaunay_edges(pts));
    EXPECT_TRUE(is_planar(g));
    // Delaunay plus hull-crossing edges until m exceeds 3n - 6 cannot stay planar.
    auto edges = g.edges();
    for (int i = 0; i < 30 && edges.size() <= 3 * 30 - 6; ++i)
      for (int j = i + 1; j < 30 && edges.size() <= 3 * 30 - 6; ++j)
        if (!g.has_edge(i, j)) edges.emplace_back(i, j);
    EXPECT_FALSE(is_planar(Graph(30, edges)));
  }
}

TEST(Planarity, RelabelInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g = random_connected(9, 0.3, rng);
    EXPECT_EQ(is_planar(g), is_planar(g.relabeled(random_permutation(9, rng))));
  }
}

TEST(WlHash, InvariantUnderRelabeling) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = random_connected(15, 0.2, rng);
    EXPECT_EQ(wl_hash(g), wl_hash(g.relabeled(random_permutation(15, rng))));
  }
}

TEST(WlHash, SeparatesSimpleNonIsomorphicGraphs) {
  Graph star(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_NE(wl_hash(path_graph(5)), wl_hash(star));
  EXPECT_NE(wl_hash(path_graph(5)), wl_hash(path_graph(6)));
  EXPECT_NE(wl_hash(cycle_graph(5)), wl_hash(path_graph(5)));
}

TEST(WlHash, RegularPairCollides) {
  Graph two_triangles(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  EXPECT_EQ(wl_hash(cycle_graph(6)), wl_hash(two_triangles));
}

TEST(Delaunay, SquareWithCenter) {
  std::vector<Point2> pts{{0, 0}, {1, 0.01}, {1.02, 1}, {0.01, 0.98}, {0.5, 0.51}};
  Graph g(5, delaunay_edges(pts));
  EXPECT_EQ(g.num_edges(), 8u);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(g.has_edge(i, 4));
}
