#include "anfm/finetune.hpp"

#include <cmath>

#include "anfm/errors.hpp"
#include "anfm/parallel.hpp"
#include "anfm/spectral.hpp"

namespace anfm {

void DiscriminatorConfig::validate() const {
  if (layers < 1) throw ConfigError("finetune.disc.layers must be >= 1");
  if (hidden < 1) throw ConfigError("finetune.disc.hidden must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("finetune.disc.lr must be positive");
}

void PPOConfig::validate() const {
  if (!(clip_eps > 0.0)) throw ConfigError("finetune.clip_eps must be positive");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("finetune.ema_decay must lie in (0, 1)");
  if (epochs < 1) throw ConfigError("finetune.epochs must be >= 1");
  if (samples < 1) throw ConfigError("finetune.samples must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("finetune.lr must be positive");
  if (!(value_lr > 0.0)) throw ConfigError("finetune.value_lr must be positive");
  if (iterations < 0 || disc_pretrain_steps < 0 || value_pretrain_steps < 0 || disc_steps < 0 || value_steps < 0) {
    throw ConfigError("finetune step counts must be >= 0");
  }
  if (value_hidden < 2 || value_layers < 1) throw ConfigError("finetune.value_hidden/value_layers out of range");
  disc.validate();
}

namespace {

constexpr int kDiscInputs = kRwpeDim + 1;

// RWPE rounded to 2^-30 so that rounding noise from summation order cannot
// leak into the discriminator input.
void disc_features(const Graph& g, std::vector<double>& out) {
  const NodeFeatures nf = node_features(g);
  for (int i = 0; i < g.num_nodes(); ++i) {
    for (int c = 0; c < kRwpeDim; ++c) out.push_back(std::ldexp(std::nearbyint(std::ldexp(nf.rwpe[i * kRwpeDim + c], 30)), -30));
    out.push_back(std::log1p(g.degree(i)));
  }
}

}  // namespace

Discriminator::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng = derived_rng(seed, 2);
  input_ = make_linear(store_, "input", kDiscInputs, cfg.hidden, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    layers_.push_back(make_feedforward(store_, "layer" + std::to_string(l), cfg.hidden, cfg.hidden, cfg.hidden, rng));
  }
  head_ = make_linear(store_, "head", cfg.hidden, 1, rng);
}

Tensor Discriminator::logits(const std::vector<Graph>& graphs) const {
  if (graphs.empty()) throw std::invalid_argument("Discriminator: empty batch");
  std::vector<double> feat;
  auto rg = std::make_shared<RowGraph>();
  auto offsets = std::make_shared<std::vector<int>>();
  rg->offsets.push_back(0);
  offsets->push_back(0);
  int base = 0;
  for (const Graph& g : graphs) {
    if (g.num_nodes() == 0) throw GraphError("Discriminator: empty graph");
    disc_features(g, feat);
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int j : g.neighbors(i)) rg->indices.push_back(base + j);
      rg->offsets.push_back(static_cast<int>(rg->indices.size()));
    }
    base += g.num_nodes();
    offsets->push_back(base);
  }
  Tensor h = relu(input_(Tensor(base, kDiscInputs, std::move(feat))));
  for (const FeedForward& layer : layers_) h = relu(layer(add(h, neighbor_sum(h, rg, true))));
  return head_(segment_mean(h, offsets, true));
}

double Discriminator::logit(const Graph& g) const {
  NoGrad guard;
  return logits({g}).item();
}

namespace {

Tensor bce(const Discriminator& disc, const std::vector<Graph>& real, const std::vector<Graph>& fake,
           double* accuracy) {
  if (real.empty() || fake.empty()) throw std::invalid_argument("discriminator loss: empty batch");
  Tensor zr = disc.logits(real), zf = disc.logits(fake);
  if (accuracy) {
    int correct = 0;
    for (double z : zr.data()) correct += z > 0.0;
    for (double z : zf.data()) correct += z < 0.0;
    *accuracy = static_cast<double>(correct) / static_cast<double>(real.size() + fake.size());
  }
  Tensor lr = scale(sum_all(log_sigmoid(zr)), -0.5 / static_cast<double>(real.size()));
  Tensor lf = scale(sum_all(log_sigmoid(scale(zf, -1.0))), -0.5 / static_cast<double>(fake.size()));
  return add(lr, lf);
}

}  // namespace

double discriminator_loss(const Discriminator& disc, const std::vector<Graph>& real, const std::vector<Graph>& fake,
                          double* accuracy) {
  NoGrad guard;
  return bce(disc, real, fake, accuracy).item();
}

double train_discriminator(Discriminator& disc, Adam& adam, const std::vector<Graph>& real,
                           const std::vector<Graph>& fake, double* accuracy) {
  Tape tape;
  Tensor loss = bce(disc, real, fake, accuracy);
  tape.backward(loss);
  adam.step(disc.parameters(), collect_gradients(disc.parameters(), tape));
  return loss.item();
}

double terminal_reward(double logit, double floor) {
  const double ls = -(std::max(-logit, 0.0) + std::log1p(std::exp(-std::abs(logit))));
  return std::max(ls, floor);
}

double terminal_reward(const Discriminator& disc, const Graph& g, double floor) {
  return terminal_reward(disc.logit(g), floor);
}

void RewardStats::update(const std::vector<double>& rewards) {
  if (rewards.empty()) return;
  double m = 0.0, s = 0.0;
  for (double r : rewards) {
    m += r;
    s += r * r;
  }
  m /= static_cast<double>(rewards.size());
  s /= static_cast<double>(rewards.size());
  if (!initialized_) {
    mean_ = m;
    second_ = s;
    initialized_ = true;
    return;
  }
  mean_ = decay_ * mean_ + (1.0 - decay_) * m;
  second_ = decay_ * second_ + (1.0 - decay_) * s;
}

std::vector<double> RewardStats::whiten(const std::vector<double>& rewards) const {
  const double sd = std::max(std::sqrt(variance()), 1e-6);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean_) / sd);
  return out;
}

std::vector<std::vector<double>> rewards_to_go(const std::vector<double>& rewards,
                                               const std::vector<std::vector<double>>& values) {
  if (rewards.size() != values.size()) throw std::invalid_argument("rewards_to_go: size mismatch");
  std::vector<std::vector<double>> g(rewards.size());
  for (std::size_t j = 0; j < rewards.size(); ++j) {
    for (double v : values[j]) g[j].push_back(rewards[j] - v);
  }
  return g;
}

std::vector<PolicyRollout> collect_rollouts(const Model& model, const std::vector<int>& sizes, std::uint64_t seed,
                                            std::size_t threads) {
  std::vector<PolicyRollout> out(sizes.size());
  parallel_for(sizes.size(), threads, [&](std::size_t j) {
    Rng rng = derived_rng(seed, j);
    out[j].rollout = model.sample(sizes[j], rng, SampleMode::kStochastic);
    out[j].input = prepare_sequence(out[j].rollout.sequence);
  });
  return out;
}

PPOStats ppo_update(Model& model, Adam& adam, const std::vector<PolicyRollout>& rollouts,
                    const std::vector<std::vector<double>>& advantages, const PPOConfig& cfg) {
  if (rollouts.empty() || rollouts.size() != advantages.size()) throw std::invalid_argument("ppo_update: size mismatch");
  PPOStats stats;
  double ratio_sum = 0.0;
  long count = 0, clipped = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    Tensor total;
    for (std::size_t j = 0; j < rollouts.size(); ++j) {
      Tensor ll = model.sequence_log_likelihood(rollouts[j].input);
      const auto& old = rollouts[j].rollout.step_log_probs;
      for (std::size_t t = 0; t < old.size(); ++t) {
        const double u = std::exp(ll.data()[t] - old[t]);
        if (!std::isfinite(u)) throw NumericError("ppo_update: non-finite probability ratio");
        ratio_sum += u;
        ++count;
        if (u < 1.0 - cfg.clip_eps || u > 1.0 + cfg.clip_eps) ++clipped;
      }
      Tensor l = ppo_surrogate(ll, old, advantages[j], cfg.clip_eps);
      total = total.defined() ? add(total, l) : l;
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(rollouts.size()));
    if (epoch == 0) stats.loss = loss.item();
    tape.backward(loss);
    Gradients grads = collect_gradients(model.parameters(), tape);
    if (cfg.grad_clip > 0.0) clip_grad_norm(grads, cfg.grad_clip);
    adam.step(model.parameters(), grads);
  }
  stats.mean_ratio = count ? ratio_sum / static_cast<double>(count) : 1.0;
  stats.clip_fraction = count ? static_cast<double>(clipped) / static_cast<double>(count) : 0.0;
  return stats;
}

double value_step(ValueModel& value, Adam& adam, const std::vector<PolicyRollout>& rollouts,
                  const std::vector<double>& targets) {
  if (rollouts.empty() || rollouts.size() != targets.size()) throw std::invalid_argument("value_step: size mismatch");
  Tape tape;
  Tensor total;
  double terms = 0.0;
  for (std::size_t j = 0; j < rollouts.size(); ++j) {
    Tensor diff = add_scalar(value.values(rollouts[j].input), -targets[j]);
    Tensor sq = sum_all(mul(diff, diff));
    terms += diff.rows();
    total = total.defined() ? add(total, sq) : sq;
  }
  Tensor loss = scale(total, 1.0 / terms);
  tape.backward(loss);
  adam.step(value.parameters(), collect_gradients(value.parameters(), tape));
  return loss.item();
}

std::vector<std::vector<double>> predict_values(const ValueModel& value, const std::vector<PolicyRollout>& rollouts) {
  NoGrad guard;
  std::vector<std::vector<double>> out;
  for (const auto& r : rollouts) out.push_back(value.values(r.input).data());
  return out;
}

ModelConfig value_model_config(const ModelConfig& generator, const PPOConfig& cfg) {
  ModelConfig v = generator;
  v.hidden = cfg.value_hidden;
  v.layers = cfg.value_layers;
  v.components = 1;
  while (v.hidden % v.heads != 0) --v.heads;
  return v;
}

GanState::GanState(Model& generator, const PPOConfig& cfg)
    : disc(cfg.disc, mix_seed(cfg.seed ^ 0xd15c)),
      disc_adam(disc.parameters(), cfg.disc.lr),
      value(value_model_config(generator.config(), cfg), mix_seed(cfg.seed ^ 0x7a1)),
      value_adam(value.parameters(), cfg.value_lr),
      gen_adam(generator.parameters(), cfg.lr),
      rewards(cfg.ema_decay) {
  cfg.validate();
}

void gan_tuning(Model& generator, GanState& state, const std::vector<Graph>& data, const PPOConfig& cfg,
                std::size_t threads, const std::function<void(const IterationStats&)>& on_iteration) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("gan_tuning: no data graphs");
  Rng rng = derived_rng(cfg.seed, 0x6a7);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uint64_t batch_id = 0;
  auto rollouts = [&] {
    std::vector<int> sizes;
    for (int j = 0; j < cfg.samples; ++j) sizes.push_back(data[pick(rng)].num_nodes());
    return collect_rollouts(generator, sizes, mix_seed(cfg.seed ^ mix_seed(++batch_id)), threads);
  };
  auto real_batch = [&] {
    std::vector<Graph> out;
    for (int j = 0; j < cfg.samples; ++j) out.push_back(data[pick(rng)]);
    return out;
  };
  auto finals = [](const std::vector<PolicyRollout>& rs) {
    std::vector<Graph> out;
    for (const auto& r : rs) out.push_back(r.rollout.final_graph());
    return out;
  };
  auto rewards_of = [&](const std::vector<PolicyRollout>& rs) {
    std::vector<double> r;
    for (const auto& x : rs) r.push_back(terminal_reward(state.disc, x.rollout.final_graph(), cfg.reward_floor));
    return r;
  };

  if (cfg.disc_pretrain_steps > 0 || cfg.value_pretrain_steps > 0) {
    const auto pool = rollouts();
    const auto fake = finals(pool);
    for (int s = 0; s < cfg.disc_pretrain_steps; ++s) train_discriminator(state.disc, state.disc_adam, real_batch(), fake);
    if (cfg.value_pretrain_steps > 0) {
      const auto r = rewards_of(pool);
      state.rewards.update(r);
      const auto w = state.rewards.whiten(r);
      for (int s = 0; s < cfg.value_pretrain_steps; ++s) value_step(state.value, state.value_adam, pool, w);
    }
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    IterationStats stats;
    stats.iteration = it;
    const auto batch = rollouts();
    const auto r = rewards_of(batch);
    for (double x : r) stats.mean_reward += x / static_cast<double>(r.size());
    state.rewards.update(r);
    const auto w = state.rewards.whiten(r);
    const auto g = rewards_to_go(w, predict_values(state.value, batch));
    for (int s = 0; s < cfg.value_steps; ++s) stats.value_loss = value_step(state.value, state.value_adam, batch, w);
    stats.ppo = ppo_update(generator, state.gen_adam, batch, g, cfg);
    const auto fake = finals(batch);
    for (int s = 0; s < cfg.disc_steps; ++s) {
      stats.disc_loss = train_discriminator(state.disc, state.disc_adam, real_batch(), fake, &stats.disc_accuracy);
    }
    if (on_iteration) on_iteration(stats);
  }
}

}  // namespace anfm
