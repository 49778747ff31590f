#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace anfm {

struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // intermediate nodes only; leaf gradients live on the tape
  bool requires_grad = false;
  bool leaf = true;
};

// Dense 2-D f64 tensor handle. Copies share storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(int rows, int cols);
  static Tensor scalar(double v);
  static Tensor parameter(int rows, int cols, std::vector<double> data);

  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool defined() const { return node_ != nullptr; }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& data() const { return node_->value; }
  // Mutable access for optimizers and checkpoint loading; never use on a recorded tensor.
  std::vector<double>& mutable_data() { return node_->value; }
  double operator()(int i, int j) const { return node_->value[static_cast<std::size_t>(i) * node_->cols + j]; }
  double item() const;

  TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<TensorNode>& shared() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// Records differentiable ops issued on this thread while alive. Ops only record
// when at least one input requires a gradient, so inference runs tape-free.
// Leaf gradients are kept per tape, which lets independent tapes share
// parameters across threads.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(std::function<void(Tape&)> backward) { ops_.push_back(std::move(backward)); }

  // Seeds d(loss)/d(loss) = 1 and runs the recorded ops in reverse. Throws on a
  // second call.
  void backward(const Tensor& loss);

  // Gradient buffer for node, zero-initialised on first access.
  std::vector<double>& grad(TensorNode* node);
  // nullptr when the leaf received no gradient.
  const std::vector<double>* leaf_grad(const Tensor& t) const;

  std::size_t num_ops() const { return ops_.size(); }

 private:
  Tape* previous_;
  std::vector<std::function<void(Tape&)>> ops_;
  std::unordered_map<const TensorNode*, std::vector<double>> leaf_grads_;
  bool done_ = false;
};

// Suspends recording on this thread.
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape* saved_;
};

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, int rows, int cols);

// Elementwise. add/mul accept b of the same shape or a [1, cols] row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);

// Row-wise reductions and normalisation
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor logsumexp_rows(const Tensor& a);  // [rows, 1]
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor sum_all(const Tensor& a);  // [1, 1]

// Indexing
Tensor gather_rows(const Tensor& a, std::vector<int> index);
Tensor slice_rows(const Tensor& a, int begin, int end);
Tensor slice_cols(const Tensor& a, int begin, int end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Mean of each contiguous row segment [offsets[s], offsets[s+1]) -> [segments, cols].
// canonical sums each column in sorted order so the result is invariant to row order.
Tensor segment_mean(const Tensor& a, std::shared_ptr<const std::vector<int>> offsets, bool canonical = false);

// Sparse row adjacency in CSR form over the rows of a stacked feature matrix.
struct RowGraph {
  std::vector<int> offsets;  // size rows + 1
  std::vector<int> indices;
};

// out_i = sum over j in nbrs(i) of a_j. canonical sorts the addends per entry.
Tensor neighbor_sum(const Tensor& a, std::shared_ptr<const RowGraph> graph, bool canonical = false);

// Scaled dot-product attention restricted to groups. Query row query_rows[a]
// attends to key_rows[b] (b <= a + |keys| - |queries| when causal). Rows that
// belong to no group produce zeros.
struct AttentionGroup {
  std::vector<int> query_rows;
  std::vector<int> key_rows;
  bool causal = false;
};
using AttentionGroups = std::vector<AttentionGroup>;

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 std::shared_ptr<const AttentionGroups> groups);

// Blockwise symmetric logits: for block b of n rows, z_b = (x_b y_b^T + y_b x_b^T) / 2.
Tensor pair_logits(const Tensor& x, const Tensor& y, int n);

// For each n x n block of logits, the Bernoulli log-likelihood of its dense 0/1
// target summed over the strict upper triangle. Block b is scored against
// targets[b % targets.size()]. Returns [1, blocks].
Tensor bernoulli_loglik(const Tensor& logits, int n,
                        std::shared_ptr<const std::vector<std::vector<std::uint8_t>>> targets);

// Clipped surrogate sum_t max(-u_t g_t, -clamp(u_t, 1 - eps, 1 + eps) g_t) with
// u_t = exp(logp_t - logp_old_t). logp is [1, T] or [T, 1]; old and adv are constants.
Tensor ppo_surrogate(const Tensor& logp, const std::vector<double>& logp_old, const std::vector<double>& adv,
                     double eps);

}  // namespace anfm
