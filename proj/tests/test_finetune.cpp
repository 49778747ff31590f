#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "anfm/datasets.hpp"
#include "anfm/errors.hpp"
#include "anfm/finetune.hpp"
#include "support.hpp"

using namespace anfm;
using anfm::testing::random_connected;
using anfm::testing::random_permutation;

namespace {

ModelConfig tiny_generator() {
  ModelConfig c;
  c.hidden = 8;
  c.layers = 1;
  c.heads = 2;
  c.components = 2;
  c.steps = 3;
  c.max_nodes = 8;
  return c;
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double sequence_ll(const Model& m, const SequenceInput& in) {
  NoGrad off;
  const Tensor ll = m.sequence_log_likelihood(in);
  return total(ll.data());
}

std::vector<std::vector<double>> constant_advantages(const std::vector<PolicyRollout>& rs, double g) {
  std::vector<std::vector<double>> out;
  for (const auto& r : rs) out.emplace_back(r.rollout.step_log_probs.size(), g);
  return out;
}

}  // namespace

TEST(TerminalReward, LogSigmoidWithFloor) {
  EXPECT_NEAR(terminal_reward(0.0, -10.0), -std::log(2.0), 1e-15);
  EXPECT_EQ(terminal_reward(-100.0, -10.0), -10.0);
  EXPECT_NEAR(terminal_reward(20.0, -10.0), -2.0611536e-9, 1e-15);
  EXPECT_LE(terminal_reward(20.0, -10.0), 0.0);
}

TEST(RewardStats, FirstBatchInitialisesAndConstantStreamWhitensToZero) {
  RewardStats s(0.9);
  EXPECT_FALSE(s.initialized());
  s.update({1.0, 2.0, 3.0});
  EXPECT_TRUE(s.initialized());
  EXPECT_NEAR(s.mean(), 2.0, 1e-15);
  EXPECT_NEAR(s.variance(), 2.0 / 3.0, 1e-12);
  for (int i = 0; i < 400; ++i) s.update({5.0, 5.0});
  EXPECT_NEAR(s.mean(), 5.0, 1e-12);
  EXPECT_GE(s.variance(), 0.0);
  for (double w : s.whiten({5.0, 5.0})) EXPECT_NEAR(w, 0.0, 1e-3);
}

TEST(RewardStats, WhiteningUsesStdFloor) {
  RewardStats s;
  s.update({2.0, 2.0});
  EXPECT_EQ(s.variance(), 0.0);
  auto w = s.whiten({2.0 + 1e-7});
  EXPECT_NEAR(w[0], 1e-7 / 1e-6, 1e-6);
}

TEST(RewardsToGo, BaselineSubtraction) {
  std::vector<double> r{1.0, -2.0};
  std::vector<std::vector<double>> zero{{0, 0, 0}, {0, 0, 0}};
  auto g = rewards_to_go(r, zero);
  EXPECT_EQ(g[0], std::vector<double>(3, 1.0));
  EXPECT_EQ(g[1], std::vector<double>(3, -2.0));
  std::vector<std::vector<double>> perfect{{1, 1, 1}, {-2, -2, -2}};
  for (const auto& row : rewards_to_go(r, perfect))
    for (double x : row) EXPECT_EQ(x, 0.0);
}

TEST(Discriminator, PermutationInvariantBitForBit) {
  DiscriminatorConfig cfg;
  cfg.hidden = 16;
  Discriminator d(cfg, 3);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g = random_connected(6 + trial % 7, 0.25, rng);
    auto perm = random_permutation(g.num_nodes(), rng);
    EXPECT_EQ(d.logit(g), d.logit(g.relabeled(perm)));
  }
}

TEST(Discriminator, IdenticalInputsLossAtLeastLn2) {
  DiscriminatorConfig cfg;
  cfg.hidden = 16;
  Discriminator d(cfg, 4);
  Rng rng(9);
  std::vector<Graph> g;
  for (int i = 0; i < 6; ++i) g.push_back(random_connected(7, 0.3, rng));
  EXPECT_GE(discriminator_loss(d, g, g), std::log(2.0) - 1e-12);
}

TEST(Discriminator, SeparatesUntrainedGeneratorFromPlanar) {
  DatasetSpec spec;
  spec.family = Family::kPlanar;
  spec.planar.num_points = 16;
  spec.train = 32;
  spec.val = spec.test = 1;
  spec.seed = 5;
  auto real = graphs_of(generate(spec, 1).train);
  ModelConfig mc = tiny_generator();
  mc.max_nodes = 16;
  Model gen(mc, 2);
  std::vector<int> sizes(32, 16);
  std::vector<Graph> fake;
  for (const auto& r : collect_rollouts(gen, sizes, 7)) fake.push_back(r.rollout.final_graph());
  DiscriminatorConfig cfg;
  cfg.hidden = 32;
  cfg.lr = 1e-3;
  Discriminator d(cfg, 6);
  Adam adam(d.parameters(), cfg.lr);
  double acc = 0.0;
  for (int s = 0; s < 200; ++s) train_discriminator(d, adam, real, fake, &acc);
  discriminator_loss(d, real, fake, &acc);
  EXPECT_GT(acc, 0.9);
}

TEST(Rollouts, StoredLogProbsMatchTeacherForcing) {
  Model gen(tiny_generator(), 12);
  auto rs = collect_rollouts(gen, {5, 6, 7}, 13);
  ASSERT_EQ(rs.size(), 3u);
  for (const auto& r : rs) {
    NoGrad off;
    const Tensor ll = gen.sequence_log_likelihood(r.input);
    ASSERT_EQ(ll.size(), r.rollout.step_log_probs.size());
    for (std::size_t t = 0; t < ll.size(); ++t) EXPECT_EQ(ll.data()[t], r.rollout.step_log_probs[t]);
  }
}

TEST(Ppo, FirstEpochRatiosAreOneAndLossIsMinusMeanAdvantageSum) {
  Model gen(tiny_generator(), 14);
  auto rs = collect_rollouts(gen, {5, 6}, 15);
  std::vector<std::vector<double>> adv{{0.5, -1.0, 2.0}, {1.5, 0.25, -0.75}};
  PPOConfig cfg;
  cfg.epochs = 1;
  cfg.lr = 1e-3;
  Adam adam(gen.parameters(), cfg.lr);
  PPOStats s = ppo_update(gen, adam, rs, adv, cfg);
  EXPECT_NEAR(s.mean_ratio, 1.0, 1e-12);
  EXPECT_EQ(s.clip_fraction, 0.0);
  EXPECT_NEAR(s.loss, -(total(adv[0]) + total(adv[1])) / 2.0, 1e-12);
}

TEST(Ppo, LargeEpsilonMatchesUnclippedSurrogate) {
  Model gen(tiny_generator(), 16);
  auto rs = collect_rollouts(gen, {6}, 17);
  auto adv = constant_advantages(rs, 1.0);
  PPOConfig cfg;
  cfg.epochs = 2;
  cfg.lr = 5e-2;
  cfg.clip_eps = 1e9;
  Adam adam(gen.parameters(), cfg.lr);
  ppo_update(gen, adam, rs, adv, cfg);
  // After two large steps the ratios moved, yet nothing is clipped.
  PPOConfig probe = cfg;
  probe.epochs = 1;
  Adam scratch(gen.parameters(), 1e-300);
  PPOStats s = ppo_update(gen, scratch, rs, adv, probe);
  double expected = 0.0;
  {
    NoGrad off;
    const Tensor ll = gen.sequence_log_likelihood(rs[0].input);
    for (std::size_t t = 0; t < ll.size(); ++t) expected -= std::exp(ll.data()[t] - rs[0].rollout.step_log_probs[t]);
  }
  EXPECT_EQ(s.clip_fraction, 0.0);
  EXPECT_NE(s.mean_ratio, 1.0);
  EXPECT_NEAR(s.loss, expected, 1e-9);
}

TEST(Ppo, PositiveAdvantageRaisesTrajectoryLikelihood) {
  Model gen(tiny_generator(), 18);
  auto rs = collect_rollouts(gen, {6}, 19);
  const double before = sequence_ll(gen, rs[0].input);
  PPOConfig cfg;
  cfg.epochs = 1;
  cfg.lr = 1e-3;
  Adam adam(gen.parameters(), cfg.lr);
  ppo_update(gen, adam, rs, constant_advantages(rs, 1.0), cfg);
  EXPECT_GT(sequence_ll(gen, rs[0].input), before);
}

TEST(Ppo, ClipFractionInUnitInterval) {
  Model gen(tiny_generator(), 20);
  auto rs = collect_rollouts(gen, {5, 6, 7}, 21);
  PPOConfig cfg;
  cfg.epochs = 4;
  cfg.lr = 5e-2;
  Adam adam(gen.parameters(), cfg.lr);
  PPOStats s = ppo_update(gen, adam, rs, constant_advantages(rs, 1.0), cfg);
  EXPECT_GT(s.clip_fraction, 0.0);
  EXPECT_LE(s.clip_fraction, 1.0);
  EXPECT_TRUE(std::isfinite(s.loss));
}

TEST(ValueModel, ConfigAndRegressionReducesBaselineError) {
  PPOConfig cfg;
  cfg.value_hidden = 12;
  cfg.value_layers = 1;
  ModelConfig vc = value_model_config(tiny_generator(), cfg);
  EXPECT_EQ(vc.components, 1);
  EXPECT_EQ(vc.hidden, 12);
  EXPECT_EQ(vc.hidden % vc.heads, 0);

  Model gen(tiny_generator(), 22);
  auto rs = collect_rollouts(gen, {5, 6, 7, 8}, 23);
  std::vector<double> targets{0.8, -0.4, 0.3, -1.0};
  ValueModel value(vc, 24);
  Adam adam(value.parameters(), 1e-2);
  auto mean_abs = [&](const std::vector<std::vector<double>>& g) {
    double s = 0.0, c = 0.0;
    for (const auto& row : g)
      for (double x : row) s += std::abs(x), c += 1;
    return s / c;
  };
  std::vector<std::vector<double>> zero;
  for (const auto& r : rs) zero.emplace_back(r.rollout.step_log_probs.size(), 0.0);
  const double baseline = mean_abs(rewards_to_go(targets, zero));
  for (int i = 0; i < 150; ++i) value_step(value, adam, rs, targets);
  EXPECT_LT(mean_abs(rewards_to_go(targets, predict_values(value, rs))), 0.5 * baseline);
}

TEST(GanTuning, ZeroIterationsLeavesGeneratorUnchanged) {
  Model gen(tiny_generator(), 25);
  std::vector<std::vector<double>> before;
  for (const auto& [n, t] : gen.parameters().entries()) before.push_back(t.data());
  PPOConfig cfg;
  cfg.iterations = 0;
  cfg.disc_pretrain_steps = 2;
  cfg.value_pretrain_steps = 2;
  cfg.samples = 4;
  cfg.value_hidden = 8;
  cfg.value_layers = 1;
  cfg.disc.hidden = 8;
  GanState state(gen, cfg);
  Rng rng(1);
  std::vector<Graph> data;
  for (int i = 0; i < 4; ++i) data.push_back(random_connected(6, 0.3, rng));
  gan_tuning(gen, state, data, cfg);
  std::vector<std::vector<double>> after;
  for (const auto& [n, t] : gen.parameters().entries()) after.push_back(t.data());
  EXPECT_EQ(before, after);
}

TEST(GanTuning, IterationsReportFiniteStats) {
  Model gen(tiny_generator(), 26);
  PPOConfig cfg;
  cfg.iterations = 2;
  cfg.disc_pretrain_steps = 2;
  cfg.value_pretrain_steps = 2;
  cfg.samples = 4;
  cfg.epochs = 2;
  cfg.value_hidden = 8;
  cfg.value_layers = 1;
  cfg.disc.hidden = 8;
  cfg.lr = 1e-4;
  GanState state(gen, cfg);
  Rng rng(2);
  std::vector<Graph> data;
  for (int i = 0; i < 4; ++i) data.push_back(random_connected(6, 0.3, rng));
  int seen = 0;
  gan_tuning(gen, state, data, cfg, 1, [&](const IterationStats& s) {
    ++seen;
    EXPECT_TRUE(std::isfinite(s.mean_reward));
    EXPECT_TRUE(std::isfinite(s.ppo.loss));
    EXPECT_GE(s.ppo.clip_fraction, 0.0);
    EXPECT_LE(s.ppo.clip_fraction, 1.0);
  });
  EXPECT_EQ(seen, 2);
}

TEST(PpoConfig, ValidationRejectsBadValues) {
  PPOConfig cfg;
  cfg.clip_eps = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = PPOConfig{};
  cfg.ema_decay = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
