#pragma once

#include <cstddef>
#include <vector>

#include "anfm/graph.hpp"

namespace anfm {

// Dense symmetric matrix, row-major.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * dim, 0.0) {}
  SymMatrix(int dim, std::vector<double> data);

  static SymMatrix identity(int dim);

  int dim() const { return dim_; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * dim_ + j]; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * dim_ + j]; }
  const std::vector<double>& data() const { return data_; }

  // Largest |a_ij - a_ji|.
  double asymmetry() const;

 private:
  int dim_ = 0;
  std::vector<double> data_;
};

// Ascending eigenvalues with orthonormal eigenvectors; vectors[k] belongs to values[k].
struct EigenPairs {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};

// L = I - D^{-1/2} A D^{-1/2}. Isolated nodes get a unit diagonal.
SymMatrix sym_normalized_laplacian(const Graph& g);

// Full eigendecomposition by cyclic Jacobi rotations. Throws NumericError when
// the input is not symmetric (1e-12) or the sweeps fail to converge.
EigenPairs eigh(const SymMatrix& m);

// Flips v so that its first entry with |v_i| > 1e-9 is positive.
void fix_sign(std::vector<double>& v);

// Eigenvector of the second-smallest eigenvalue of the normalized Laplacian,
// unit norm, sign-fixed. Throws GraphError("Fiedler undefined") when g is
// disconnected or has fewer than two nodes.
std::vector<double> fiedler_vector(const Graph& g);

inline constexpr int kLapPeDim = 4;
inline constexpr int kRwpeDim = 20;

// Positional and structural node features. Per-node arrays are row-major
// [n x dim].
struct NodeFeatures {
  int n = 0;
  std::vector<double> lap_pe;        // n x kLapPeDim
  std::vector<double> rwpe;          // n x kRwpeDim
  std::vector<double> cycle_counts;  // n x 3: triangles, 4-cycles, 5-cycles through the node
  double graph_cycle_totals[3] = {0.0, 0.0, 0.0};
};

NodeFeatures node_features(const Graph& g);

}  // namespace anfm
