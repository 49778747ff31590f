#include "anfm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "anfm/errors.hpp"

namespace anfm {

SymMatrix::SymMatrix(int dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(dim) * dim) throw NumericError("SymMatrix: size mismatch");
}

SymMatrix SymMatrix::identity(int dim) {
  SymMatrix m(dim);
  for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

double SymMatrix::asymmetry() const {
  double worst = 0.0;
  for (int i = 0; i < dim_; ++i) {
    for (int j = i + 1; j < dim_; ++j) worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
  }
  return worst;
}

SymMatrix sym_normalized_laplacian(const Graph& g) {
  const int n = g.num_nodes();
  SymMatrix L(n);
  std::vector<double> inv_sqrt(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (g.degree(i) > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)));
    L(i, i) = 1.0;
  }
  for (const Edge& e : g.edges()) {
    const double w = -inv_sqrt[e.u] * inv_sqrt[e.v];
    L(e.u, e.v) = w;
    L(e.v, e.u) = w;
  }
  return L;
}

EigenPairs eigh(const SymMatrix& m) {
  const int n = m.dim();
  double scale = 0.0;
  for (double x : m.data()) scale = std::max(scale, std::abs(x));
  if (m.asymmetry() > 1e-12 * std::max(1.0, scale)) throw NumericError("eigh: matrix is not symmetric");

  std::vector<double> a = m.data();
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
  auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
  auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i) * n + j]; };

  double norm = 0.0;
  for (double x : a) norm += x * x;
  norm = std::sqrt(norm);

  constexpr int kMaxSweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep <= kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) off += A(i, j) * A(i, j);
      }
    }
    if (std::sqrt(off) <= 1e-10 * norm) {
      converged = true;
      break;
    }
    if (sweep == kMaxSweeps) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw NumericError("eigh: Jacobi sweeps did not converge");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return A(x, x) < A(y, y); });
  EigenPairs out;
  out.values.reserve(n);
  out.vectors.reserve(n);
  for (int k : idx) {
    out.values.push_back(A(k, k));
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = V(i, k);
    out.vectors.push_back(std::move(col));
  }
  return out;
}

void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-9) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

std::vector<double> fiedler_vector(const Graph& g) {
  if (g.num_nodes() < 2 || !is_connected(g)) throw GraphError("Fiedler undefined");
  EigenPairs eig = eigh(sym_normalized_laplacian(g));
  std::vector<double> f = std::move(eig.vectors[1]);
  double norm = 0.0;
  for (double x : f) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : f) x /= norm;
  fix_sign(f);
  return f;
}

namespace {

// out = m * A for dense row-major m (n x n) and the adjacency structure of g.
void times_adjacency(const Graph& g, const std::vector<double>& m, std::vector<double>& out,
                     const std::vector<double>* column_scale = nullptr) {
  const int n = g.num_nodes();
  out.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = &m[static_cast<std::size_t>(i) * n];
    double* dst = &out[static_cast<std::size_t>(i) * n];
    for (int l = 0; l < n; ++l) {
      double w = row[l];
      if (w == 0.0) continue;
      if (column_scale) w *= (*column_scale)[l];
      for (int j : g.neighbors(l)) dst[j] += w;
    }
  }
}

}  // namespace

NodeFeatures node_features(const Graph& g) {
  const int n = g.num_nodes();
  NodeFeatures f;
  f.n = n;
  f.lap_pe.assign(static_cast<std::size_t>(n) * kLapPeDim, 0.0);
  f.rwpe.assign(static_cast<std::size_t>(n) * kRwpeDim, 0.0);
  f.cycle_counts.assign(static_cast<std::size_t>(n) * 3, 0.0);
  if (n == 0) return f;

  // Laplacian PE: eigenvectors of the smallest nonzero eigenvalues. Isolated
  // nodes get a zero diagonal here so they land in the skipped null space
  // instead of contributing arbitrary unit vectors.
  SymMatrix lap = sym_normalized_laplacian(g);
  for (int i = 0; i < n; ++i) {
    if (g.degree(i) == 0) lap(i, i) = 0.0;
  }
  EigenPairs eig = eigh(lap);
  int used = 0;
  for (int k = 0; k < n && used < kLapPeDim; ++k) {
    if (eig.values[k] <= 1e-8) continue;
    std::vector<double>& vec = eig.vectors[k];
    fix_sign(vec);
    for (int i = 0; i < n; ++i) f.lap_pe[static_cast<std::size_t>(i) * kLapPeDim + used] = vec[i];
    ++used;
  }

  // Random-walk return probabilities (D^{-1} A)^k_ii, k = 1..kRwpeDim.
  std::vector<double> inv_deg(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (g.degree(i) > 0) inv_deg[i] = 1.0 / g.degree(i);
  }
  std::vector<double> power(static_cast<std::size_t>(n) * n, 0.0), next;
  for (int i = 0; i < n; ++i) power[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (int k = 0; k < kRwpeDim; ++k) {
    // (M D^{-1} A): scale column l of M by 1/d_l, then multiply by A.
    times_adjacency(g, power, next, &inv_deg);
    power.swap(next);
    for (int i = 0; i < n; ++i) f.rwpe[static_cast<std::size_t>(i) * kRwpeDim + k] = power[static_cast<std::size_t>(i) * n + i];
  }

  // Cycle counts from closed-walk counts with degenerate walks removed.
  std::vector<double> identity(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) identity[static_cast<std::size_t>(i) * n + i] = 1.0;
  std::vector<double> a2, a3;
  times_adjacency(g, identity, a2);  // A
  std::vector<double> a1 = a2;
  times_adjacency(g, a1, a2);  // A^2
  times_adjacency(g, a2, a3);  // A^3
  auto at = [n](const std::vector<double>& m, int i, int j) { return m[static_cast<std::size_t>(i) * n + j]; };

  std::vector<double> deg(n), t(n);
  for (int i = 0; i < n; ++i) {
    deg[i] = g.degree(i);
    t[i] = at(a3, i, i);
  }
  double totals[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    double a4 = 0.0, a5 = 0.0;
    for (int l = 0; l < n; ++l) {
      a4 += at(a2, i, l) * at(a2, l, i);
      a5 += at(a2, i, l) * at(a3, l, i);
    }
    double nbr_deg = 0.0, nbr_t = 0.0, wedge_deg = 0.0;
    for (int u : g.neighbors(i)) {
      nbr_deg += deg[u];
      nbr_t += t[u];
      wedge_deg += at(a2, i, u) * deg[u];
    }
    const double c3 = t[i] / 2.0;
    const double c4 = (a4 - deg[i] * (deg[i] - 1.0) - nbr_deg) / 2.0;
    const double c5 = (a5 - 2.0 * deg[i] * t[i] - 2.0 * wedge_deg - nbr_t + 5.0 * t[i]) / 2.0;
    const double counts[3] = {std::round(c3), std::round(c4), std::round(c5)};
    for (int c = 0; c < 3; ++c) {
      f.cycle_counts[static_cast<std::size_t>(i) * 3 + c] = counts[c];
      totals[c] += counts[c];
    }
  }
  f.graph_cycle_totals[0] = totals[0] / 3.0;
  f.graph_cycle_totals[1] = totals[1] / 4.0;
  f.graph_cycle_totals[2] = totals[2] / 5.0;
  return f;
}

}  // namespace anfm
