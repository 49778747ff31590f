#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "anfm/filtration.hpp"
#include "anfm/graph.hpp"
#include "anfm/nn.hpp"
#include "anfm/optim.hpp"
#include "anfm/rng.hpp"
#include "anfm/tensor.hpp"

namespace anfm {

enum class TemporalMode { kCausal, kFirstOrder };

std::string to_string(TemporalMode m);
TemporalMode parse_temporal_mode(const std::string& s);

struct ModelConfig {
  int hidden = 256;
  int layers = 5;
  int heads = 4;
  int components = 8;
  int steps = 30;
  int max_nodes = 64;
  TemporalMode temporal = TemporalMode::kCausal;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Canonical JSON text (sorted keys, no whitespace).
std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

// Per-node input width: lap-pe, rwpe and log1p cycle counts.
inline constexpr int kInputFeatures = 4 + 20 + 3;

// Inputs for `count` consecutive timesteps t0, t0+1, ... of one sequence,
// stacked as rows s * n + i.
struct StepBlock {
  int n = 0;
  int t0 = 0;
  int count = 0;
  Tensor features;                 // [count n, kInputFeatures]
  std::vector<int> rank_rows;      // ordering rank of each row's node
  std::vector<double> conditioning;  // count x 3: log1p graph cycle totals
  std::shared_ptr<const RowGraph> graph;
  std::shared_ptr<const AttentionGroups> structural;
};

using AdjacencyList = std::vector<std::vector<std::uint8_t>>;

// Teacher-forcing input: graphs G~_0..G~_{T-1} feed the backbone and
// G~_1..G~_T are the targets.
struct SequenceInput {
  StepBlock block;
  std::shared_ptr<const AdjacencyList> targets;

  int n() const { return block.n; }
  int steps() const { return block.count; }
};

// Builds the block for graphs[0..] at timesteps t0, t0+1, ...
StepBlock make_step_block(const std::vector<Graph>& graphs, int t0, const NodeOrdering& ordering);

// ordering defaults to the identity.
SequenceInput prepare_sequence(const NoisySequence& seq, const NodeOrdering* ordering = nullptr);

// Structural/temporal mixing stack shared by the generator and the value model.
class Backbone {
 public:
  Backbone() = default;
  Backbone(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg, Rng& rng);

  // Cached temporal keys/values per layer, one [n, D] entry per processed step.
  struct Cache {
    std::vector<std::vector<Tensor>> keys, values;
    int steps = 0;
  };

  // Representations [count n, D]. With a cache, earlier steps are read from it
  // and the block's own keys/values are appended.
  Tensor forward(const StepBlock& block, Cache* cache = nullptr) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Layer {
    LayerNorm ln_struct, ln_struct_ff, ln_temp, ln_temp_ff;
    FeedForward gin, ff_struct, ff_temp;
    Linear q, k, v, o, film;
    Linear tq, tk, tv, to;
  };

  ModelConfig cfg_;
  Linear input_;
  Tensor node_embedding_;  // [max_nodes, D]
  std::vector<Layer> layers_;
  LayerNorm final_ln_;
};

// Mixture of multivariate Bernoullis over the upper triangle of an n x n
// adjacency matrix. Arrays are K x n x n, row-major; the diagonal is zero.
struct EdgeDistribution {
  int n = 0;
  int components = 0;
  std::vector<double> pi;
  std::vector<double> logits;  // empty when built from probabilities
  std::vector<double> p;
  std::vector<double> log_p, log_1mp;

  static EdgeDistribution from_logits(std::vector<double> pi, std::vector<double> logits, int n);
  // log(0) is replaced by kLogZeroGuard.
  static EdgeDistribution from_probabilities(std::vector<double> pi, std::vector<double> p, int n);

  double prob(int k, int i, int j) const { return p[(static_cast<std::size_t>(k) * n + i) * n + j]; }
};

inline constexpr double kLogZeroGuard = -1e30;

// log sum_k pi_k prod_{i<j} Bern(y_ij; p_k^{ij}). guarded is set when a
// probability of exactly 0 or 1 conflicts with the target.
double step_log_likelihood(const EdgeDistribution& dist, const Graph& target, bool* guarded = nullptr);

enum class SampleMode { kStochastic, kComponentMode };

struct Rollout {
  NoisySequence sequence;
  std::vector<double> step_log_probs;  // log p(G~_{t+1} | prefix), t = 0..T-1
  double seconds = 0.0;

  Graph final_graph() const { return sequence.graph_at(sequence.steps()); }
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  // [T, 1] per-step log-likelihoods of the targets.
  Tensor sequence_log_likelihood(const SequenceInput& in) const;

  // Distribution of G~_{t+1} given the prefix G~_0..G~_t.
  EdgeDistribution distribution(const SequenceInput& in, int t) const;

  // Representations [T n, D], exposed for equivariance and causality checks.
  Tensor representations(const SequenceInput& in) const { return backbone_.forward(in.block); }

  // Rolls out T steps from the empty graph on n nodes with the identity
  // ordering. steps > 0 overrides the configured T.
  Rollout sample(int n, Rng& rng, SampleMode mode = SampleMode::kStochastic, int steps = 0) const;

 private:
  struct Decoded {
    Tensor logits;  // [K count n, n], block index k * count + s
    Tensor log_pi;  // [count, K]
  };
  Decoded decode(const Tensor& reps, int n, int count) const;

  struct Component {
    Linear dense1, dense2, dense3;
  };

  ModelConfig cfg_;
  ParameterStore store_;
  Backbone backbone_;
  std::vector<Component> components_;
  Linear mix1_, mix2_, mix3_;
};

// Baseline v(G~_0..G~_t) for t = 0..T-1 from mean-pooled backbone representations.
class ValueModel {
 public:
  ValueModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  Tensor values(const SequenceInput& in) const;  // [T, 1]

 private:
  ModelConfig cfg_;
  ParameterStore store_;
  Backbone backbone_;
  Linear head_;
};

}  // namespace anfm
