#include "anfm/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace anfm {

Tensor ParameterStore::add(const std::string& name, Tensor value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  value.node()->requires_grad = true;
  value.node()->leaf = true;
  entries_.emplace_back(name, value);
  return value;
}

Tensor ParameterStore::uniform(const std::string& name, int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (double& x : data) x = dist(rng);
  return add(name, Tensor(rows, cols, std::move(data)));
}

Tensor ParameterStore::constant(const std::string& name, int rows, int cols, double value) {
  return add(name, Tensor(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, value)));
}

const Tensor* ParameterStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.second.size();
  return total;
}

Gradients zero_gradients(const ParameterStore& store) {
  Gradients g;
  g.reserve(store.size());
  for (const auto& e : store.entries()) g.emplace_back(e.second.size(), 0.0);
  return g;
}

Gradients collect_gradients(const ParameterStore& store, const Tape& tape) {
  Gradients g = zero_gradients(store);
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (const auto* lg = tape.leaf_grad(store.entries()[i].second)) g[i] = *lg;
  }
  return g;
}

void accumulate(Gradients& into, const Gradients& other, double weight) {
  if (into.size() != other.size()) throw std::invalid_argument("accumulate: gradient sets differ");
  for (std::size_t i = 0; i < into.size(); ++i) {
    for (std::size_t j = 0; j < into[i].size(); ++j) into[i][j] += weight * other[i][j];
  }
}

double global_norm(const Gradients& grads) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (double x : g) s += x * x;
  }
  return std::sqrt(s);
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  for (auto& g : grads) {
    for (double& x : g) x *= factor;
  }
  return factor;
}

Adam::Adam(const ParameterStore& store, double lr_, double beta1_, double beta2_, double eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {
  state.m = zero_gradients(store);
  state.v = zero_gradients(store);
}

void Adam::step(ParameterStore& store, const Gradients& grads) {
  if (grads.size() != store.size() || state.m.size() != store.size()) {
    throw std::invalid_argument("Adam: gradients do not match the parameter store");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor p = store.entries()[i].second;
    auto& data = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grads[i][j];
      m[j] = beta1 * m[j] + (1.0 - beta1) * g;
      v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
      data[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

}  // namespace anfm
