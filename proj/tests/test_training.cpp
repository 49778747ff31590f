#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "anfm/checkpoint.hpp"
#include "anfm/errors.hpp"
#include "anfm/training.hpp"
#include "support.hpp"

using namespace anfm;
using anfm::testing::random_connected;

namespace {

ModelConfig small_model(int steps) {
  ModelConfig c;
  c.hidden = 8;
  c.layers = 1;
  c.heads = 2;
  c.components = 2;
  c.steps = steps;
  c.max_nodes = 10;
  return c;
}

std::vector<Graph> small_graphs(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Graph> out;
  for (int i = 0; i < count; ++i) out.push_back(random_connected(5 + i % 4, 0.2, rng));
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("anfm_test_" + name)).string();
}

std::vector<std::vector<double>> snapshot(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.parameters().entries()) out.push_back(t.data());
  return out;
}

}  // namespace

TEST(Expand, CountsAndEndpoints) {
  auto graphs = small_graphs(6, 1);
  FiltrationConfig f;
  f.steps = 4;
  TrainConfig cfg;
  cfg.perturbations = 3;
  SequenceStore store = expand(graphs, f, cfg);
  ASSERT_EQ(store.size(), 18u);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const NoisySequence& s = store.sequences[i];
    const Graph& g = graphs[store.source[i]];
    EXPECT_EQ(store.source[i], static_cast<int>(i / 3));
    EXPECT_TRUE(s.edge_sets.front().empty());
    // Relabeled into the training ordering, so only the edge count is comparable directly.
    EXPECT_EQ(s.edge_sets.back().size(), g.num_edges());
    EXPECT_EQ(store.inputs[i].steps(), 4);
  }
  EXPECT_EQ(store.max_nodes, 8);
}

TEST(Expand, NoNoiseSinglePerturbationIsDeterministicFiltration) {
  auto graphs = small_graphs(4, 2);
  FiltrationConfig f;
  f.steps = 5;
  TrainConfig cfg;
  cfg.perturbations = 1;
  cfg.noise = false;
  SequenceStore store = expand(graphs, f, cfg);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    Rng rng(0);
    FiltrationSequence seq = build_filtration(graphs[i], f, rng);
    const auto& rank = seq.ordering.rank;
    for (int t = 0; t <= 5; ++t) {
      std::vector<Edge> mapped;
      for (const Edge& e : seq.edge_sets[t]) mapped.emplace_back(rank[e.u], rank[e.v]);
      std::sort(mapped.begin(), mapped.end());
      EXPECT_EQ(store.sequences[i].edge_sets[t], mapped);
    }
  }
}

TEST(Expand, DfsRedrawsOrderingPerPerturbation) {
  Rng rng(3);
  std::vector<Graph> graphs{random_connected(10, 0.3, rng)};
  FiltrationConfig f;
  f.function = FiltrationFunction::kDfs;
  f.schedule = Schedule::kDfsLinear;
  f.steps = 5;
  TrainConfig cfg;
  cfg.perturbations = 8;
  cfg.noise = false;
  SequenceStore store = expand(graphs, f, cfg);
  bool differ = false;
  for (std::size_t i = 1; i < store.size(); ++i) differ |= store.sequences[i].edge_sets != store.sequences[0].edge_sets;
  EXPECT_TRUE(differ);
}

TEST(LambdaSchedule, AffineWithZeroEndpoints) {
  TrainConfig cfg;
  auto l = lambda_schedule(cfg, 5);
  ASSERT_EQ(l.size(), 6u);
  EXPECT_EQ(l[0], 0.0);
  EXPECT_EQ(l[5], 0.0);
  EXPECT_DOUBLE_EQ(l[1], 0.25);
  EXPECT_NEAR(l[4], 0.05, 1e-15);
  EXPECT_NEAR(l[2] - l[1], l[3] - l[2], 1e-15);
  cfg.noise = false;
  for (double x : lambda_schedule(cfg, 5)) EXPECT_EQ(x, 0.0);
}

TEST(Stage1, LossIsNegatedMeanSequenceLogLikelihood) {
  auto graphs = small_graphs(3, 4);
  FiltrationConfig f;
  f.steps = 4;
  TrainConfig cfg;
  cfg.perturbations = 1;
  SequenceStore store = expand(graphs, f, cfg);
  Model model(small_model(4), 9);
  std::vector<const SequenceInput*> batch;
  double expected = 0.0;
  for (const auto& in : store.inputs) {
    batch.push_back(&in);
    NoGrad off;
    const Tensor ll = model.sequence_log_likelihood(in);
    for (double x : ll.data()) expected -= x;
  }
  expected /= static_cast<double>(batch.size());
  EXPECT_NEAR(batch_nll(model, batch, nullptr), expected, 1e-12);
}

TEST(Stage1, InitialLossNearUniformBound) {
  Rng rng(5);
  std::vector<Graph> graphs{random_connected(8, 0.2, rng)};
  FiltrationConfig f;
  f.steps = 6;
  TrainConfig cfg;
  cfg.perturbations = 1;
  SequenceStore store = expand(graphs, f, cfg);
  Model model(small_model(6), 3);
  const double bound = 6 * 28 * std::log(2.0);
  const double loss = batch_nll(model, {&store.inputs[0]}, nullptr);
  EXPECT_GT(loss, 0.8 * bound);
  EXPECT_LT(loss, 1.2 * bound);
}

TEST(Stage1, StepsReduceLossOnFixedBatch) {
  auto graphs = small_graphs(2, 6);
  FiltrationConfig f;
  f.steps = 3;
  TrainConfig cfg;
  cfg.perturbations = 1;
  cfg.noise = false;
  cfg.lr = 1e-2;
  SequenceStore store = expand(graphs, f, cfg);
  Model model(small_model(3), 2);
  Stage1Trainer trainer(model, cfg);
  std::vector<const SequenceInput*> batch{&store.inputs[0], &store.inputs[1]};
  const double before = batch_nll(model, batch, nullptr);
  for (int i = 0; i < 30; ++i) trainer.step(batch);
  EXPECT_LT(batch_nll(model, batch, nullptr), 0.5 * before);
  EXPECT_EQ(trainer.steps_done(), 30);
}

TEST(Stage1, GradClipBoundsNorm) {
  auto graphs = small_graphs(2, 7);
  FiltrationConfig f;
  f.steps = 3;
  TrainConfig cfg;
  cfg.perturbations = 1;
  cfg.grad_clip = 1e-3;
  SequenceStore store = expand(graphs, f, cfg);
  Model model(small_model(3), 2);
  Stage1Trainer trainer(model, cfg);
  StepStats s = trainer.step(store);
  EXPECT_GT(s.grad_norm, 1e-3);
  EXPECT_NEAR(s.clip_scale, 1e-3 / s.grad_norm, 1e-15);
}

TEST(Stage1, DeterministicResume) {
  auto graphs = small_graphs(4, 8);
  FiltrationConfig f;
  f.steps = 3;
  TrainConfig cfg;
  cfg.perturbations = 2;
  cfg.batch_size = 3;
  cfg.lr = 1e-3;
  cfg.seed = 17;
  SequenceStore store = expand(graphs, f, cfg);

  Model straight(small_model(3), 5);
  Stage1Trainer a(straight, cfg);
  a.train(store, 100);

  Model first(small_model(3), 5);
  Stage1Trainer b(first, cfg);
  b.train(store, 50);
  const std::string path = temp_path("resume.anfm");
  save_generator(path, first, &b.optimizer(), &b.rng(), b.steps_done());

  LoadedGenerator loaded = load_generator(path);
  EXPECT_EQ(loaded.step, 50);
  Stage1Trainer c(*loaded.model, cfg);
  ASSERT_TRUE(has_adam("generator/", loaded.data));
  import_adam(c.optimizer(), loaded.model->parameters(), "generator/", loaded.data);
  set_rng_state(c.rng(), loaded.data.rng_state);
  c.set_steps_done(loaded.step);
  c.train(store, 50);
  std::filesystem::remove(path);

  EXPECT_EQ(c.steps_done(), 100);
  EXPECT_EQ(snapshot(*loaded.model), snapshot(straight));
}

TEST(Checkpoint, RoundTripReproducesOutputsAndSamples) {
  Model model(small_model(3), 21);
  const std::string path = temp_path("roundtrip.anfm");
  save_generator(path, model, nullptr, nullptr, 7);
  LoadedGenerator loaded = load_generator(path);
  std::filesystem::remove(path);
  EXPECT_EQ(loaded.step, 7);
  EXPECT_EQ(loaded.model->config(), model.config());
  EXPECT_EQ(snapshot(*loaded.model), snapshot(model));
  Rng r1(3), r2(3);
  Rollout x = model.sample(7, r1), y = loaded.model->sample(7, r2);
  EXPECT_EQ(x.sequence.edge_sets, y.sequence.edge_sets);
  EXPECT_EQ(x.step_log_probs, y.step_log_probs);
}

TEST(Checkpoint, EncodeDecodeIsExact) {
  CheckpointData d;
  d.config = R"({"a":1})";
  d.tensors.push_back({"x/w", {2, 3}, {1, -2.5, 3e-300, 4, 5, 6}});
  d.tensors.push_back({"x/b", {3}, {0.1, 0.2, 0.3}});
  Rng rng(99);
  rng();
  d.rng_state = rng_state(rng);
  const std::string bytes = encode_checkpoint(d);
  EXPECT_EQ(bytes.substr(0, 4), "ANFM");
  CheckpointData e = decode_checkpoint(bytes);
  EXPECT_EQ(e.config, d.config);
  ASSERT_EQ(e.tensors.size(), 2u);
  EXPECT_EQ(e.tensors[0].data, d.tensors[0].data);
  EXPECT_EQ(e.tensors[1].dims, d.tensors[1].dims);
  Rng restored;
  set_rng_state(restored, e.rng_state);
  EXPECT_EQ(restored(), rng());
}

TEST(Checkpoint, CorruptInputsRaiseTypedErrors) {
  CheckpointData d;
  d.tensors.push_back({"w", {4}, {1, 2, 3, 4}});
  const std::string bytes = encode_checkpoint(d);
  auto kind_of = [](std::string_view b) {
    try {
      decode_checkpoint(b);
    } catch (const DataError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error";
    return DataError::Kind::kIo;
  };
  EXPECT_EQ(kind_of(std::string_view(bytes).substr(0, 6)), DataError::Kind::kHeader);
  for (std::size_t cut : {bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_EQ(kind_of(std::string_view(bytes).substr(0, cut)), DataError::Kind::kTruncated) << cut;
  }
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of(bad), DataError::Kind::kBadMagic);
  bad = bytes;
  bad[4] = 9;
  EXPECT_EQ(kind_of(bad), DataError::Kind::kVersion);
}

TEST(Checkpoint, ShapeMismatchIsIncompatible) {
  Model a(small_model(3), 1);
  CheckpointData d;
  export_parameters(a.parameters(), "generator/", d);
  ModelConfig wider = small_model(3);
  wider.hidden = 12;
  Model b(wider, 1);
  try {
    import_parameters(b.parameters(), "generator/", d);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kIncompatible);
    EXPECT_NE(std::string(e.what()).find("incompatible checkpoint"), std::string::npos);
  }
  d.tensors.pop_back();
  Model c(small_model(3), 1);
  EXPECT_THROW(import_parameters(c.parameters(), "generator/", d), DataError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint(temp_path("does_not_exist.anfm"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::kIo);
  }
}
