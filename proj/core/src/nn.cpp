#include "anfm/nn.hpp"

#include <cmath>

namespace anfm {

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

Linear make_linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng, bool bias,
                   double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = store.uniform(name + ".weight", in, out, bound, rng);
  if (bias) l.bias = store.uniform(name + ".bias", 1, out, bound, rng);
  return l;
}

LayerNorm make_layernorm(ParameterStore& store, const std::string& name, int dim) {
  return {store.constant(name + ".gain", 1, dim, 1.0), store.constant(name + ".bias", 1, dim, 0.0)};
}

FeedForward make_feedforward(ParameterStore& store, const std::string& name, int dim, int hidden, int out, Rng& rng) {
  return {make_linear(store, name + ".in", dim, hidden, rng), make_linear(store, name + ".out", hidden, out, rng)};
}

std::vector<double> sinusoidal_embedding(int position, int dim) {
  std::vector<double> e(dim, 0.0);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    e[2 * i] = std::sin(position * freq);
    e[2 * i + 1] = std::cos(position * freq);
  }
  return e;
}

}  // namespace anfm
