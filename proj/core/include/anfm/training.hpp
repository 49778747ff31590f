#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "anfm/filtration.hpp"
#include "anfm/graph.hpp"
#include "anfm/model.hpp"
#include "anfm/optim.hpp"

namespace anfm {

struct TrainConfig {
  int steps = 1000;
  int batch_size = 16;
  double lr = 1e-4;
  double grad_clip = 0.0;  // <= 0 disables clipping
  int perturbations = 4;
  bool noise = true;
  double lambda_first = 0.25;
  double lambda_last = 0.05;
  double ordering_sigma = 0.0;  // jitter on derived node weights before sorting
  std::uint64_t seed = 0;
  int eval_every = 0;

  void validate() const;
};

// Noisy filtration sequences relabeled so that the training node ordering is
// the identity, with precomputed model inputs.
struct SequenceStore {
  std::vector<NoisySequence> sequences;
  std::vector<SequenceInput> inputs;
  std::vector<int> source;  // index of the originating graph
  int max_nodes = 0;

  std::size_t size() const { return inputs.size(); }
};

// Builds P noisy sequences per graph. DFS filtrations redraw the DFS ordering
// for every perturbation. Graphs must be connected.
SequenceStore expand(const std::vector<Graph>& graphs, const FiltrationConfig& filtration, const TrainConfig& cfg,
                     std::size_t threads = 1);

// Lambda schedule for T steps, or all zeros when noise is disabled.
std::vector<double> lambda_schedule(const TrainConfig& cfg, int steps);

struct StepStats {
  double loss = 0.0;
  double grad_norm = 0.0;
  double clip_scale = 1.0;
};

// -mean over the batch of the sequence log-likelihood, recorded on a fresh tape.
double batch_nll(const Model& model, const std::vector<const SequenceInput*>& batch, Gradients* grads);

class Stage1Trainer {
 public:
  Stage1Trainer(Model& model, const TrainConfig& cfg);

  // One optimizer step on a batch drawn uniformly with replacement.
  StepStats step(const SequenceStore& store);
  StepStats step(const std::vector<const SequenceInput*>& batch);

  void train(const SequenceStore& store, int steps, const std::function<void(long, const StepStats&)>& on_step = {});

  long steps_done() const { return steps_done_; }
  void set_steps_done(long s) { steps_done_ = s; }
  Adam& optimizer() { return adam_; }
  Rng& rng() { return rng_; }
  Model& model() { return model_; }

 private:
  Model& model_;
  TrainConfig cfg_;
  Adam adam_;
  Rng rng_;
  long steps_done_ = 0;
};

}  // namespace anfm
