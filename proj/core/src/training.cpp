#include "anfm/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "anfm/errors.hpp"
#include "anfm/parallel.hpp"

namespace anfm {

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train.steps must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (perturbations < 1) throw ConfigError("train.perturbations must be >= 1");
  if (lambda_first < 0.0 || lambda_first > 1.0 || lambda_last < 0.0 || lambda_last > 1.0) {
    throw ConfigError("train.lambda_first and train.lambda_last must lie in [0, 1]");
  }
  if (ordering_sigma < 0.0) throw ConfigError("train.ordering_sigma must be >= 0");
}

std::vector<double> lambda_schedule(const TrainConfig& cfg, int steps) {
  if (!cfg.noise) return std::vector<double>(steps + 1, 0.0);
  return affine_lambda_schedule(steps, cfg.lambda_first, cfg.lambda_last);
}

SequenceStore expand(const std::vector<Graph>& graphs, const FiltrationConfig& filtration, const TrainConfig& cfg,
                     std::size_t threads) {
  filtration.validate();
  cfg.validate();
  const int P = cfg.perturbations;
  const std::size_t total = graphs.size() * P;
  SequenceStore store;
  store.sequences.resize(total);
  store.inputs.resize(total);
  store.source.resize(total);
  const auto lambdas = lambda_schedule(cfg, filtration.steps);
  const bool dfs = filtration.function == FiltrationFunction::kDfs;
  parallel_for(graphs.size(), threads, [&](std::size_t gi) {
    const Graph& g = graphs[gi];
    std::optional<FiltrationSequence> shared;
    for (int p = 0; p < P; ++p) {
      Rng rng = derived_rng(cfg.seed, gi * P + p);
      FiltrationSequence seq;
      if (dfs) {
        seq = build_filtration(g, filtration, rng);
      } else {
        if (!shared) shared = build_filtration(g, filtration, rng);
        seq = *shared;
        if (cfg.ordering_sigma > 0.0) seq.ordering = derived_node_ordering(g, seq.weights, cfg.ordering_sigma, rng);
      }
      const auto& rank = seq.ordering.rank;
      for (auto& edges : seq.edge_sets) {
        for (Edge& e : edges) e = Edge(rank[e.u], rank[e.v]);
        std::sort(edges.begin(), edges.end());
      }
      const std::size_t idx = gi * P + p;
      store.sequences[idx] = noise_augment(seq, lambdas, rng);
      store.inputs[idx] = prepare_sequence(store.sequences[idx]);
      store.source[idx] = static_cast<int>(gi);
    }
  });
  for (const Graph& g : graphs) store.max_nodes = std::max(store.max_nodes, g.num_nodes());
  return store;
}

double batch_nll(const Model& model, const std::vector<const SequenceInput*>& batch, Gradients* grads) {
  if (batch.empty()) throw std::invalid_argument("batch_nll: empty batch");
  Tape tape;
  Tensor total;
  for (const SequenceInput* in : batch) {
    Tensor ll = sum_all(model.sequence_log_likelihood(*in));
    total = total.defined() ? add(total, ll) : ll;
  }
  Tensor loss = scale(total, -1.0 / static_cast<double>(batch.size()));
  if (grads) {
    tape.backward(loss);
    *grads = collect_gradients(model.parameters(), tape);
  }
  return loss.item();
}

Stage1Trainer::Stage1Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), adam_(model.parameters(), cfg.lr), rng_(derived_rng(cfg.seed, 0x5eed)) {
  cfg.validate();
}

StepStats Stage1Trainer::step(const SequenceStore& store) {
  if (store.size() == 0) throw std::invalid_argument("Stage1Trainer: empty sequence store");
  std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
  std::vector<const SequenceInput*> batch;
  for (int b = 0; b < cfg_.batch_size; ++b) batch.push_back(&store.inputs[pick(rng_)]);
  return step(batch);
}

StepStats Stage1Trainer::step(const std::vector<const SequenceInput*>& batch) {
  StepStats stats;
  Gradients grads;
  try {
    stats.loss = batch_nll(model_, batch, &grads);
  } catch (const NumericError& e) {
    std::ostringstream msg;
    msg << "stage I step " << steps_done_ << ": " << e.what();
    throw NumericError(msg.str());
  }
  if (!std::isfinite(stats.loss)) throw NumericError("stage I step " + std::to_string(steps_done_) + ": non-finite loss");
  stats.grad_norm = global_norm(grads);
  if (cfg_.grad_clip > 0.0) stats.clip_scale = clip_grad_norm(grads, cfg_.grad_clip);
  adam_.step(model_.parameters(), grads);
  ++steps_done_;
  return stats;
}

void Stage1Trainer::train(const SequenceStore& store, int steps,
                          const std::function<void(long, const StepStats&)>& on_step) {
  for (int s = 0; s < steps; ++s) {
    const StepStats st = step(store);
    if (on_step) on_step(steps_done_, st);
  }
}

}  // namespace anfm
