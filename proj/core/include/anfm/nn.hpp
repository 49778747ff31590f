#pragma once

#include <string>
#include <vector>

#include "anfm/optim.hpp"
#include "anfm/tensor.hpp"

namespace anfm {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [1, out], undefined when built without bias

  Tensor operator()(const Tensor& x) const;
};

// PyTorch-style init: U(-1/sqrt(in), 1/sqrt(in)) scaled by gain.
Linear make_linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng, bool bias = true,
                   double gain = 1.0);

struct LayerNorm {
  Tensor gain, bias;
  Tensor operator()(const Tensor& x) const { return layernorm(x, gain, bias); }
};

LayerNorm make_layernorm(ParameterStore& store, const std::string& name, int dim);

// Linear -> ReLU -> Linear.
struct FeedForward {
  Linear in, out;
  Tensor operator()(const Tensor& x) const { return out(relu(in(x))); }
};

FeedForward make_feedforward(ParameterStore& store, const std::string& name, int dim, int hidden, int out, Rng& rng);

// Transformer-style sinusoidal embedding of an integer position.
std::vector<double> sinusoidal_embedding(int position, int dim);

}  // namespace anfm
