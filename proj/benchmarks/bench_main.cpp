#include <benchmark/benchmark.h>

#include <vector>

#include "anfm/datasets.hpp"
#include "anfm/filtration.hpp"
#include "anfm/model.hpp"
#include "anfm/orbits.hpp"
#include "anfm/spectral.hpp"
#include "anfm/training.hpp"

using namespace anfm;

namespace {

Tensor random_tensor(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (double& x : v) x = g(rng);
  return Tensor(rows, cols, std::move(v));
}

Graph planar_graph(int points) {
  DatasetSpec spec;
  spec.family = Family::kPlanar;
  spec.planar.num_points = points;
  spec.train = spec.val = spec.test = 1;
  spec.seed = 3;
  return generate(spec, 1).train.front().graph;
}

ModelConfig desk_model(TemporalMode mode) {
  ModelConfig c;
  c.hidden = 32;
  c.layers = 2;
  c.heads = 4;
  c.components = 4;
  c.steps = 8;
  c.max_nodes = 64;
  c.temporal = mode;
  return c;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  const Tensor a = random_tensor(n, n, rng), b = random_tensor(n, n, rng);
  NoGrad off;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_MatmulBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  const Tensor a0 = random_tensor(n, n, rng), b0 = random_tensor(n, n, rng);
  const Tensor a = Tensor::parameter(n, n, a0.data()), b = Tensor::parameter(n, n, b0.data());
  for (auto _ : state) {
    Tape tape;
    tape.backward(sum_all(matmul(a, b)));
    benchmark::DoNotOptimize(tape.leaf_grad(a));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

static void BM_Attention(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  Rng rng(3);
  const Tensor q = random_tensor(rows, 32, rng), k = random_tensor(rows, 32, rng), v = random_tensor(rows, 32, rng);
  auto groups = std::make_shared<AttentionGroups>();
  AttentionGroup g;
  for (int r = 0; r < rows; ++r) g.query_rows.push_back(r), g.key_rows.push_back(r);
  groups->push_back(g);
  NoGrad off;
  for (auto _ : state) benchmark::DoNotOptimize(attention(q, k, v, 4, groups));
}
BENCHMARK(BM_Attention)->Arg(16)->Arg(64)->Arg(128);

static void BM_Eigh(benchmark::State& state) {
  const Graph g = planar_graph(static_cast<int>(state.range(0)));
  const SymMatrix l = sym_normalized_laplacian(g);
  for (auto _ : state) benchmark::DoNotOptimize(eigh(l));
}
BENCHMARK(BM_Eigh)->Arg(16)->Arg(32)->Arg(64);

static void BM_OrbitCounts(benchmark::State& state) {
  const Graph g = planar_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(orbit_counts(g));
}
BENCHMARK(BM_OrbitCounts)->Arg(16)->Arg(64);

static void BM_Filtration(benchmark::State& state) {
  const Graph g = planar_graph(64);
  FiltrationConfig cfg;
  cfg.steps = 30;
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(build_filtration(g, cfg, rng));
}
BENCHMARK(BM_Filtration);

static void BM_Sample(benchmark::State& state) {
  const auto mode = state.range(1) ? TemporalMode::kFirstOrder : TemporalMode::kCausal;
  const Model model(desk_model(mode), 5);
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(model.sample(static_cast<int>(state.range(0)), rng));
}
BENCHMARK(BM_Sample)->Args({20, 0})->Args({20, 1})->Args({64, 0})->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  DatasetSpec spec;
  spec.family = Family::kLobster;
  spec.lobster.backbone_mean = 5;
  spec.lobster.max_nodes = 30;
  spec.train = 32;
  spec.val = spec.test = 1;
  spec.seed = 7;
  FiltrationConfig f;
  f.steps = 8;
  TrainConfig tc;
  tc.batch_size = static_cast<int>(state.range(0));
  tc.lr = 1e-3;
  const SequenceStore store = expand(graphs_of(generate(spec, 1).train), f, tc);
  Model model(desk_model(TemporalMode::kCausal), 8);
  Stage1Trainer trainer(model, tc);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(store));
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
