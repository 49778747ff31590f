#pragma once

#include <string>
#include <utility>
#include <vector>

#include "anfm/rng.hpp"
#include "anfm/tensor.hpp"

namespace anfm {

// Named trainable tensors in registration order. The order fixes gradient
// summation, checkpoint layout and optimizer state alignment.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor value);
  // Uniform(-bound, bound) initialisation.
  Tensor uniform(const std::string& name, int rows, int cols, double bound, Rng& rng);
  Tensor constant(const std::string& name, int rows, int cols, double value);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const Tensor* find(const std::string& name) const;
  std::size_t num_scalars() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// One buffer per store entry; missing gradients are zero.
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParameterStore& store);
Gradients collect_gradients(const ParameterStore& store, const Tape& tape);
void accumulate(Gradients& into, const Gradients& other, double weight = 1.0);
double global_norm(const Gradients& grads);

// Rescales grads to max_norm when their global l2 norm exceeds it; returns the
// factor applied (1 when untouched).
double clip_grad_norm(Gradients& grads, double max_norm);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long step = 0;
};

class Adam {
 public:
  Adam(const ParameterStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParameterStore& store, const Gradients& grads);

  double lr;
  double beta1, beta2, eps;
  AdamState state;
};

}  // namespace anfm
