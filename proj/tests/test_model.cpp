#include <gtest/gtest.h>

#include <cmath>

#include "anfm/errors.hpp"
#include "anfm/model.hpp"
#include "anfm/spectral.hpp"
#include "support.hpp"

using namespace anfm;
using namespace anfm::testing;

namespace {

ModelConfig tiny(int K = 2, int T = 3, TemporalMode mode = TemporalMode::kCausal, int D = 8) {
  ModelConfig c;
  c.hidden = D;
  c.layers = 2;
  c.heads = 2;
  c.components = K;
  c.steps = T;
  c.max_nodes = 12;
  c.temporal = mode;
  return c;
}

NoisySequence random_sequence(int n, int T, Rng& rng, double p = 0.4) {
  NoisySequence s;
  s.n = n;
  s.edge_sets.resize(T + 1);
  s.lambdas.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (bernoulli(rng, p)) s.edge_sets[t].emplace_back(i, j);
  return s;
}

void scale_parameters(Model& m, double factor) {
  for (auto& [name, t] : m.parameters().entries()) {
    Tensor h = t;
    for (double& x : h.mutable_data()) x *= factor;
  }
}

double total_ll(const Model& m, const SequenceInput& in) {
  NoGrad off;
  const Tensor ll = m.sequence_log_likelihood(in);
  double s = 0.0;
  for (double x : ll.data()) s += x;
  return s;
}

}  // namespace

TEST(ModelConfig, JsonRoundTripAndValidation) {
  ModelConfig c = tiny(3, 5, TemporalMode::kFirstOrder);
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  EXPECT_THROW(model_config_from_json(R"({"hidden": 8, "bogus": 1})"), ConfigError);
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_temporal_mode("sideways"), ConfigError);
}

class Normalization : public ::testing::TestWithParam<std::tuple<int, int, TemporalMode>> {};

TEST_P(Normalization, StepDistributionSumsToOne) {
  auto [n, K, mode] = GetParam();
  Rng rng(100 + n * 10 + K);
  Model model(tiny(K, 3, mode), 7);
  scale_parameters(model, 2.5);
  SequenceInput in = prepare_sequence(random_sequence(n, 3, rng));
  for (int t = 0; t < 3; ++t) {
    EdgeDistribution d = model.distribution(in, t);
    double pi = 0.0;
    for (double x : d.pi) pi += x;
    EXPECT_NEAR(pi, 1.0, 1e-12);
    double total = 0.0;
    for_each_graph(n, [&](const Graph& g) { total += std::exp(step_log_likelihood(d, g)); });
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Model, Normalization,
                         ::testing::Combine(::testing::Values(3, 4), ::testing::Values(1, 3),
                                            ::testing::Values(TemporalMode::kCausal, TemporalMode::kFirstOrder)));

TEST(Model, StepLikelihoodAgreesWithTensorPath) {
  Rng rng(3);
  Model model(tiny(3, 4), 9);
  NoisySequence seq = random_sequence(6, 4, rng);
  SequenceInput in = prepare_sequence(seq);
  Tensor ll = model.sequence_log_likelihood(in);
  ASSERT_EQ(ll.rows(), 4);
  for (int t = 0; t < 4; ++t) {
    EdgeDistribution d = model.distribution(in, t);
    EXPECT_NEAR(ll.data()[t], step_log_likelihood(d, seq.graph_at(t + 1)), 1e-10);
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 6; ++i) {
        EXPECT_EQ(d.prob(k, i, i), 0.0);
        for (int j = 0; j < 6; ++j) EXPECT_EQ(d.prob(k, i, j), d.prob(k, j, i));
      }
  }
}

TEST(Model, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  Model model(tiny(2, 3), 11);
  SequenceInput in = prepare_sequence(random_sequence(4, 3, rng));
  Tape tape;
  tape.backward(sum_all(model.sequence_log_likelihood(in)));
  Gradients g = collect_gradients(model.parameters(), tape);
  double worst = 0.0;
  const double h = 1e-4;
  auto& entries = model.parameters().entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor t = entries[p].second;
    auto& data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); i += 3) {
      const double keep = data[i];
      auto at = [&](double x) {
        data[i] = x;
        return total_ll(model, in);
      };
      const double fd = (8 * (at(keep + h) - at(keep - h)) - (at(keep + 2 * h) - at(keep - 2 * h))) / (12 * h);
      data[i] = keep;
      const double rel = std::abs(fd - g[p][i]) / std::max({std::abs(fd), std::abs(g[p][i]), 1e-6});
      if (rel > 1e-4) ADD_FAILURE() << entries[p].first << "[" << i << "] fd " << fd << " tape " << g[p][i];
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Model, InitialLossNearUniformBernoulli) {
  Rng rng(5);
  Model model(tiny(4, 6, TemporalMode::kCausal, 16), 12);
  const int n = 12;
  SequenceInput in = prepare_sequence(random_sequence(n, 6, rng, 0.2));
  const double uniform = 6 * n * (n - 1) / 2 * std::log(2.0);
  EXPECT_NEAR(-total_ll(model, in), uniform, 0.2 * uniform);
}

class Causality : public ::testing::TestWithParam<TemporalMode> {};

TEST_P(Causality, FutureGraphsDoNotAffectEarlierSteps) {
  Rng rng(6);
  const int n = 5, T = 4;
  Model model(tiny(2, T, GetParam()), 13);
  NoisySequence seq = random_sequence(n, T, rng);
  SequenceInput in = prepare_sequence(seq);
  Tensor reps = model.representations(in);
  for (int t = 0; t < T; ++t) {
    NoisySequence alt = seq;
    Rng other(50 + t);
    NoisySequence noise = random_sequence(n, T, other, 0.6);
    for (int s = t + 1; s <= T; ++s) alt.edge_sets[s] = noise.edge_sets[s];
    SequenceInput in2 = prepare_sequence(alt);
    Tensor reps2 = model.representations(in2);
    for (int r = 0; r < (t + 1) * n; ++r)
      for (int c = 0; c < reps.cols(); ++c) EXPECT_NEAR(reps(r, c), reps2(r, c), 1e-12);
    EdgeDistribution a = model.distribution(in, t), b = model.distribution(in2, t);
    for (std::size_t i = 0; i < a.p.size(); ++i) EXPECT_NEAR(a.p[i], b.p[i], 1e-12);
    for (std::size_t k = 0; k < a.pi.size(); ++k) EXPECT_NEAR(a.pi[k], b.pi[k], 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Model, Causality, ::testing::Values(TemporalMode::kCausal, TemporalMode::kFirstOrder));

TEST(Model, FirstOrderStepDependsOnlyOnCurrentGraph) {
  Rng rng(7);
  Model model(tiny(2, 4, TemporalMode::kFirstOrder), 14);
  NoisySequence seq = random_sequence(5, 4, rng);
  NoisySequence alt = seq;
  alt.edge_sets[1] = random_sequence(5, 1, rng, 0.7).edge_sets[1];
  Tensor a = model.representations(prepare_sequence(seq)), b = model.representations(prepare_sequence(alt));
  // Rows of step 2 onward see G~_2.. only.
  for (int r = 2 * 5; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) EXPECT_NEAR(a(r, c), b(r, c), 1e-12);
  Model causal(tiny(2, 4, TemporalMode::kCausal), 14);
  Tensor ca = causal.representations(prepare_sequence(seq)), cb = causal.representations(prepare_sequence(alt));
  double diff = 0.0;
  for (int r = 2 * 5; r < ca.rows(); ++r)
    for (int c = 0; c < ca.cols(); ++c) diff = std::max(diff, std::abs(ca(r, c) - cb(r, c)));
  EXPECT_GT(diff, 1e-6);
}

namespace {

bool features_permute(const Graph& g, const std::vector<int>& perm) {
  NodeFeatures a = node_features(g), b = node_features(g.relabeled(perm));
  for (int v = 0; v < g.num_nodes(); ++v)
    for (int k = 0; k < kLapPeDim; ++k)
      if (std::abs(a.lap_pe[v * kLapPeDim + k] - b.lap_pe[perm[v] * kLapPeDim + k]) > 1e-9) return false;
  return true;
}

}  // namespace

TEST(Model, EquivariantWhenFeaturesPermute) {
  // Relabel nodes and ordering ranks together; outputs must permute whenever
  // the positional features do (eigenvector signs are labeling dependent).
  Rng rng(8);
  const int n = 6, T = 3;
  Model model(tiny(2, T), 15);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 5; ++trial) {
    NoisySequence seq = random_sequence(n, T, rng, 0.5);
    auto perm = random_permutation(n, rng);
    bool ok = true;
    for (int t = 0; t < T; ++t) ok &= features_permute(seq.graph_at(t), perm);
    if (!ok) continue;
    ++checked;
    NoisySequence moved = seq;
    for (auto& es : moved.edge_sets) {
      for (auto& e : es) e = Edge(perm[e.u], perm[e.v]);
      std::sort(es.begin(), es.end());
    }
    NodeOrdering ord;
    ord.rank.resize(n);
    for (int v = 0; v < n; ++v) ord.rank[perm[v]] = v;
    SequenceInput a = prepare_sequence(seq), b = prepare_sequence(moved, &ord);
    Tensor ra = model.representations(a), rb = model.representations(b);
    for (int s = 0; s < T; ++s)
      for (int v = 0; v < n; ++v)
        for (int c = 0; c < ra.cols(); ++c) EXPECT_NEAR(ra(s * n + v, c), rb(s * n + perm[v], c), 1e-9);
    Tensor la = model.sequence_log_likelihood(a), lb = model.sequence_log_likelihood(b);
    for (int t = 0; t < T; ++t) EXPECT_NEAR(la.data()[t], lb.data()[t], 1e-9);
  }
  EXPECT_EQ(checked, 5);
}

TEST(Model, IncrementalSamplingMatchesFullPass) {
  for (TemporalMode mode : {TemporalMode::kCausal, TemporalMode::kFirstOrder}) {
    Model model(tiny(3, 5, mode), 16);
    Rng rng(9);
    Rollout r = model.sample(7, rng, SampleMode::kStochastic);
    ASSERT_EQ(r.sequence.steps(), 5);
    EXPECT_TRUE(r.sequence.edge_sets[0].empty());
    Tensor ll = model.sequence_log_likelihood(prepare_sequence(r.sequence));
    for (int t = 0; t < 5; ++t) EXPECT_EQ(r.step_log_probs[t], ll.data()[t]);
  }
}

TEST(Model, SamplingIsSeedDeterministic) {
  Model model(tiny(2, 4), 17);
  Rng a(3), b(3), c(4);
  Rollout ra = model.sample(8, a), rb = model.sample(8, b), rc = model.sample(8, c);
  EXPECT_EQ(ra.sequence.edge_sets, rb.sequence.edge_sets);
  EXPECT_NE(ra.sequence.edge_sets, rc.sequence.edge_sets);
  Rng d(3);
  EXPECT_EQ(model.sample(8, d, SampleMode::kStochastic, 9).sequence.steps(), 9);
  Rng e(3);
  EXPECT_THROW(model.sample(13, e), GraphError);
}

TEST(Model, ComponentModeThresholdsLogits) {
  Model model(tiny(1, 3), 18);
  scale_parameters(model, 3.0);
  Rng rng(10);
  Rollout r = model.sample(6, rng, SampleMode::kComponentMode);
  SequenceInput in = prepare_sequence(r.sequence);
  for (int t = 0; t < 3; ++t) {
    EdgeDistribution d = model.distribution(in, t);
    Graph g = r.sequence.graph_at(t + 1);
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) EXPECT_EQ(g.has_edge(i, j), d.prob(0, i, j) > 0.5);
  }
}

TEST(ValueModel, OneValuePerStep) {
  Rng rng(11);
  ValueModel v(tiny(1, 4), 19);
  Tensor out = v.values(prepare_sequence(random_sequence(5, 4, rng)));
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), 1);
}
