#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "anfm/graph.hpp"
#include "anfm/model.hpp"
#include "anfm/nn.hpp"
#include "anfm/optim.hpp"

namespace anfm {

struct DiscriminatorConfig {
  int layers = 3;
  int hidden = 128;
  double lr = 1e-4;

  void validate() const;
};

// GIN over RWPE and log-degree inputs with mean pooling; one logit per graph.
// Neighbor sums and pooling use sorted addends, so the logit is invariant to
// node relabeling bit for bit.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

  Tensor logits(const std::vector<Graph>& graphs) const;  // [B, 1]
  double logit(const Graph& g) const;

  const DiscriminatorConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

 private:
  DiscriminatorConfig cfg_;
  ParameterStore store_;
  Linear input_;
  std::vector<FeedForward> layers_;
  Linear head_;
};

// Binary cross-entropy with real graphs labeled 1, averaged over both halves.
double discriminator_loss(const Discriminator& disc, const std::vector<Graph>& real, const std::vector<Graph>& fake,
                          double* accuracy = nullptr);

// One Adam step on the loss above; returns the pre-step loss.
double train_discriminator(Discriminator& disc, Adam& adam, const std::vector<Graph>& real,
                           const std::vector<Graph>& fake, double* accuracy = nullptr);

// max(log sigmoid(logit), floor).
double terminal_reward(double logit, double floor);
double terminal_reward(const Discriminator& disc, const Graph& g, double floor);

// Reward whitening with exponential moving averages of the first and second
// moments. The first batch initialises both moments.
class RewardStats {
 public:
  explicit RewardStats(double decay = 0.99) : decay_(decay) {}

  void update(const std::vector<double>& rewards);
  std::vector<double> whiten(const std::vector<double>& rewards) const;

  double mean() const { return mean_; }
  double variance() const { return std::max(second_ - mean_ * mean_, 0.0); }
  bool initialized() const { return initialized_; }

 private:
  double decay_;
  double mean_ = 0.0, second_ = 0.0;
  bool initialized_ = false;
};

// g[j][t] = rewards[j] - values[j][t], t = 0..T-1.
std::vector<std::vector<double>> rewards_to_go(const std::vector<double>& rewards,
                                               const std::vector<std::vector<double>>& values);

struct PPOConfig {
  double clip_eps = 0.2;
  double reward_floor = -10.0;
  int epochs = 4;
  int samples = 32;
  double lr = 1.25e-7;
  double ema_decay = 0.99;
  int iterations = 0;
  double grad_clip = 0.0;
  int disc_pretrain_steps = 100;
  int value_pretrain_steps = 100;
  int disc_steps = 1;
  int value_steps = 1;
  int value_hidden = 128;
  int value_layers = 5;
  double value_lr = 2.5e-4;
  DiscriminatorConfig disc;
  std::uint64_t seed = 0;

  void validate() const;
};

// A sampled trajectory with its frozen per-step log-likelihoods.
struct PolicyRollout {
  Rollout rollout;
  SequenceInput input;
};

std::vector<PolicyRollout> collect_rollouts(const Model& model, const std::vector<int>& sizes, std::uint64_t seed,
                                            std::size_t threads = 1);

struct PPOStats {
  double loss = 0.0;       // surrogate of the first epoch
  double mean_ratio = 0.0;  // over all epochs
  double clip_fraction = 0.0;
};

// N_epoch passes of the clipped surrogate, one Adam step per pass.
PPOStats ppo_update(Model& model, Adam& adam, const std::vector<PolicyRollout>& rollouts,
                    const std::vector<std::vector<double>>& advantages, const PPOConfig& cfg);

// One MSE regression step of v(G~_0..G~_t) toward the rollout rewards. Returns the loss.
double value_step(ValueModel& value, Adam& adam, const std::vector<PolicyRollout>& rollouts,
                  const std::vector<double>& targets);

std::vector<std::vector<double>> predict_values(const ValueModel& value, const std::vector<PolicyRollout>& rollouts);

ModelConfig value_model_config(const ModelConfig& generator, const PPOConfig& cfg);

struct IterationStats {
  int iteration = 0;
  double mean_reward = 0.0;
  double disc_loss = 0.0;
  double disc_accuracy = 0.0;
  double value_loss = 0.0;
  PPOStats ppo;
};

struct GanState {
  Discriminator disc;
  Adam disc_adam;
  ValueModel value;
  Adam value_adam;
  Adam gen_adam;
  RewardStats rewards;

  GanState(Model& generator, const PPOConfig& cfg);
};

// Pretrains discriminator and value model, then alternates rollouts, reward
// whitening, value regression, PPO epochs and discriminator updates. Node
// counts for rollouts are drawn from the data graphs.
void gan_tuning(Model& generator, GanState& state, const std::vector<Graph>& data, const PPOConfig& cfg,
                std::size_t threads = 1, const std::function<void(const IterationStats&)>& on_iteration = {});

}  // namespace anfm
