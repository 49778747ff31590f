#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "anfm/errors.hpp"
#include "anfm/spectral.hpp"
#include "support.hpp"

using namespace anfm;
using namespace anfm::testing;

namespace {

void expect_spectrum(const Graph& g, std::vector<double> expected) {
  std::sort(expected.begin(), expected.end());
  EigenPairs e = eigh(sym_normalized_laplacian(g));
  ASSERT_EQ(e.values.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(e.values[k], expected[k], 1e-10) << k;
}

// Simple cycles of length 3..5 through each node, by explicit path search.
std::vector<std::array<double, 3>> brute_cycles(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<std::array<double, 3>> per(n, {0, 0, 0});
  std::vector<int> path;
  std::vector<bool> used(n, false);
  std::function<void(int)> extend = [&](int start) {
    int last = path.back();
    for (int nb : g.neighbors(last)) {
      if (nb == start && path.size() >= 3) {
        // Each cycle is found twice per start node (two directions); count once
        // by requiring the second node to be smaller than the last.
        if (path[1] < path.back()) {
          for (int v : path) per[v][path.size() - 3] += 1.0;
        }
        continue;
      }
      if (used[nb] || nb < start || path.size() == 5) continue;
      used[nb] = true;
      path.push_back(nb);
      extend(start);
      path.pop_back();
      used[nb] = false;
    }
  };
  for (int s = 0; s < n; ++s) {
    path = {s};
    used.assign(n, false);
    used[s] = true;
    extend(s);
  }
  return per;
}

}  // namespace

TEST(Eigh, PathCycleCompleteSpectra) {
  for (int n : {2, 5, 9}) {
    std::vector<double> ev;
    for (int k = 0; k < n; ++k) ev.push_back(1.0 - std::cos(std::numbers::pi * k / (n - 1)));
    expect_spectrum(path_graph(n), ev);
  }
  for (int n : {4, 7}) {
    std::vector<double> ev;
    for (int k = 0; k < n; ++k) ev.push_back(1.0 - std::cos(2 * std::numbers::pi * k / n));
    expect_spectrum(cycle_graph(n), ev);
  }
  std::vector<double> kn(6, 6.0 / 5.0);
  kn[0] = 0.0;
  expect_spectrum(complete_graph(6), kn);
}

TEST(Eigh, ReconstructsRandomSymmetricMatrix) {
  Rng rng(2);
  std::normal_distribution<double> z;
  const int d = 12;
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) m(i, j) = m(j, i) = z(rng);
  EigenPairs e = eigh(m);
  for (int k = 1; k < d; ++k) EXPECT_LE(e.values[k - 1], e.values[k]);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double r = 0.0, dot = 0.0;
      for (int k = 0; k < d; ++k) {
        r += e.vectors[k][i] * e.values[k] * e.vectors[k][j];
        dot += e.vectors[i][k] * e.vectors[j][k];
      }
      EXPECT_NEAR(r, m(i, j), 1e-10);
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-10);
    }
  }
}

TEST(Eigh, RejectsAsymmetricInput) {
  SymMatrix m(2, {1.0, 0.5, 0.4, 1.0});
  EXPECT_THROW(eigh(m), NumericError);
}

TEST(Fiedler, PathIsMonotoneAndSignFixed) {
  Graph g = path_graph(8);
  auto f = fiedler_vector(g);
  EXPECT_GT(f[0], 0.0);
  // The random-walk eigenvector D^{-1/2} f is monotone along the path.
  for (int i = 1; i < 8; ++i) EXPECT_LT(f[i] / std::sqrt(g.degree(i)), f[i - 1] / std::sqrt(g.degree(i - 1)));
  double norm = 0.0;
  for (double x : f) norm += x * x;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_THROW(fiedler_vector(Graph(4, {{0, 1}, {2, 3}})), GraphError);
  EXPECT_THROW(fiedler_vector(Graph(1)), GraphError);
}

TEST(NodeFeatures, RwpeMatchesDenseMatrixPowers) {
  Rng rng(13);
  Graph g = random_connected(9, 0.3, rng);
  const int n = g.num_nodes();
  std::vector<double> m(n * n, 0.0), p(n * n, 0.0);
  for (int i = 0; i < n; ++i) {
    p[i * n + i] = 1.0;
    for (int j : g.neighbors(i)) m[i * n + j] = 1.0 / g.degree(i);
  }
  NodeFeatures f = node_features(g);
  for (int k = 0; k < kRwpeDim; ++k) {
    std::vector<double> next(n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) next[i * n + j] += p[i * n + l] * m[l * n + j];
    p = next;
    for (int i = 0; i < n; ++i) EXPECT_NEAR(f.rwpe[i * kRwpeDim + k], p[i * n + i], 1e-12);
  }
}

TEST(NodeFeatures, CycleCountsMatchBruteForce) {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    Graph g = random_connected(5 + trial % 8, 0.35, rng);
    NodeFeatures f = node_features(g);
    auto want = brute_cycles(g);
    std::array<double, 3> totals{0, 0, 0};
    for (int v = 0; v < g.num_nodes(); ++v) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_DOUBLE_EQ(f.cycle_counts[v * 3 + c], want[v][c]) << "node " << v << " length " << c + 3;
        totals[c] += want[v][c];
      }
    }
    for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(f.graph_cycle_totals[c], totals[c] / (c + 3));
  }
}

TEST(NodeFeatures, KnownCycleCounts) {
  NodeFeatures k5 = node_features(complete_graph(5));
  EXPECT_DOUBLE_EQ(k5.graph_cycle_totals[0], 10.0);
  EXPECT_DOUBLE_EQ(k5.graph_cycle_totals[1], 15.0);
  EXPECT_DOUBLE_EQ(k5.graph_cycle_totals[2], 12.0);
  NodeFeatures c5 = node_features(cycle_graph(5));
  EXPECT_DOUBLE_EQ(c5.graph_cycle_totals[2], 1.0);
  EXPECT_DOUBLE_EQ(c5.graph_cycle_totals[0], 0.0);
}

TEST(NodeFeatures, LapPeSkipsIsolatedNodes) {
  Graph g(5, {{0, 1}, {1, 2}});
  NodeFeatures f = node_features(g);
  for (int i = 3; i < 5; ++i)
    for (int k = 0; k < kLapPeDim; ++k) EXPECT_EQ(f.lap_pe[i * kLapPeDim + k], 0.0);
  NodeFeatures empty = node_features(Graph(4));
  for (double x : empty.lap_pe) EXPECT_EQ(x, 0.0);
}

TEST(NodeFeatures, PermutationEquivariantUpToSign) {
  Rng rng(19);
  Graph g = random_connected(10, 0.25, rng);
  auto perm = random_permutation(10, rng);
  NodeFeatures a = node_features(g), b = node_features(g.relabeled(perm));
  for (int v = 0; v < 10; ++v) {
    for (int k = 0; k < kRwpeDim; ++k) EXPECT_NEAR(a.rwpe[v * kRwpeDim + k], b.rwpe[perm[v] * kRwpeDim + k], 1e-12);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(a.cycle_counts[v * 3 + c], b.cycle_counts[perm[v] * 3 + c]);
  }
  // Eigenvector columns agree up to a global sign when the spectrum is simple.
  EigenPairs e = eigh(sym_normalized_laplacian(g));
  bool simple = true;
  for (int k = 1; k <= kLapPeDim + 1 && k < 10; ++k) simple &= e.values[k] - e.values[k - 1] > 1e-6;
  if (simple) {
    for (int k = 0; k < kLapPeDim; ++k) {
      double s = a.lap_pe[0 * kLapPeDim + k] * b.lap_pe[perm[0] * kLapPeDim + k] >= 0 ? 1.0 : -1.0;
      for (int v = 0; v < 10; ++v) EXPECT_NEAR(a.lap_pe[v * kLapPeDim + k], s * b.lap_pe[perm[v] * kLapPeDim + k], 1e-8);
    }
  }
}
