#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anfm/checkpoint.hpp"
#include "anfm/datasets.hpp"
#include "anfm/errors.hpp"
#include "anfm/evaluation.hpp"
#include "anfm/filtration.hpp"
#include "anfm/finetune.hpp"
#include "anfm/model.hpp"
#include "anfm/parallel.hpp"
#include "anfm/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace anfm::cli {
namespace {

// Flags are recorded as JSON patches onto the config document, so a bad flag
// value is reported under the same key name as a bad file entry.
class Overrides {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = slots_.emplace_back(Slot{key, {}});
    app->add_option(flag, slot.value, help + " (" + key + ")");
  }
  void add_switch(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = switches_.emplace_back(Switch{key, false});
    app->add_flag(flag, slot.on, help + " (" + key + ")");
  }
  void apply(json& doc) const {
    for (const auto& s : slots_) {
      if (!s.value) continue;
      json v = json::parse(*s.value, nullptr, false);
      if (v.is_discarded()) v = *s.value;
      doc[json::json_pointer("/" + pointer(s.key))] = v;
    }
    for (const auto& s : switches_) {
      if (s.on) doc[json::json_pointer("/" + pointer(s.key))] = true;
    }
  }

 private:
  static std::string pointer(std::string key) {
    std::replace(key.begin(), key.end(), '.', '/');
    return key;
  }
  struct Slot {
    std::string key;
    std::optional<std::string> value;
  };
  struct Switch {
    std::string key;
    bool on;
  };
  std::deque<Slot> slots_;
  std::deque<Switch> switches_;
};

struct Common {
  std::string config_path;
  Overrides overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "JSON run config");
  c.overrides.add(app, "--seed", "seed", "Global seed");
  c.overrides.add(app, "-o,--out", "output_dir", "Output directory");
  c.overrides.add(app, "--threads", "threads", "Worker threads, 0 = all cores");
}

RunConfig resolve(const Common& c) {
  json doc = json::object();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("cannot open config '" + c.config_path + "'");
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config '" + c.config_path + "' is not valid JSON");
  }
  c.overrides.apply(doc);
  RunConfig base;
  if (const char* env = std::getenv("ANFM_SEED")) {
    try {
      base.apply_seed(std::stoull(env));
    } catch (const std::exception&) {
      throw ConfigError("ANFM_SEED must be an unsigned integer");
    }
  }
  RunConfig cfg = parse_run_config(doc, base);
  cfg.validate();
  return cfg;
}

fs::path prepare_output(const RunConfig& cfg, const std::string& command) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  std::ofstream out(dir / (command + ".config.json"));
  out << to_json(cfg).dump(2) << "\n";
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

std::size_t threads_of(const RunConfig& cfg) { return static_cast<std::size_t>(cfg.threads); }

std::vector<int> node_counts(const std::vector<Graph>& graphs) {
  std::vector<int> sizes;
  sizes.reserve(graphs.size());
  for (const auto& g : graphs) sizes.push_back(g.num_nodes());
  return sizes;
}

// Node counts for `count` samples: fixed, or drawn from the training graphs.
std::vector<int> draw_sizes(const RunConfig& cfg, const std::string& data_path, int count) {
  if (cfg.eval.fixed_nodes > 0) return std::vector<int>(count, cfg.eval.fixed_nodes);
  if (data_path.empty()) throw ConfigError("eval.fixed_nodes is 0 and no --data graphs were given to draw sizes from");
  auto pool = node_counts(load_gds(data_path));
  if (pool.empty()) throw DataError(DataError::Kind::kMalformed, "'" + data_path + "' holds no graphs");
  Rng rng = derived_rng(cfg.seed, 0x51e5);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<int> sizes(count);
  for (auto& s : sizes) s = pool[pick(rng)];
  return sizes;
}

json row_stats(const std::vector<double>& xs) {
  std::vector<double> v = xs;
  std::sort(v.begin(), v.end());
  double median = v.empty() ? 0.0 : (v[(v.size() - 1) / 2] + v[v.size() / 2]) / 2;
  std::vector<double> dev;
  for (double x : v) dev.push_back(std::abs(x - median));
  std::sort(dev.begin(), dev.end());
  double mad = dev.empty() ? 0.0 : (dev[(dev.size() - 1) / 2] + dev[dev.size() / 2]) / 2;
  return {{"median", median}, {"mad", mad}, {"count", v.size()}};
}

// ---- commands ----

int dataset_gen(const Common& c) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "dataset");
  Dataset ds = generate(cfg.dataset, threads_of(cfg));
  for (auto [name, records] : {std::pair{"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}}) {
    auto graphs = graphs_of(*records);
    save_gds((dir / (std::string(name) + ".gds")).string(), graphs);
    save_jsonl((dir / (std::string(name) + ".jsonl")).string(), graphs);
  }
  std::cout << "wrote " << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size()
            << " graphs to " << dir.string() << "\n";
  return 0;
}

struct FiltrateArgs {
  std::string input;
  std::size_t index = 0;
  bool edges = false;
  bool noise = false;
};

int filtrate(const Common& c, const FiltrateArgs& a) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "filtrate");
  auto graphs = load_gds(a.input);
  if (a.index >= graphs.size()) {
    throw DataError(DataError::Kind::kMalformed,
                    "graph index " + std::to_string(a.index) + " out of range (" + std::to_string(graphs.size()) + ")");
  }
  const Graph& g = graphs[a.index];
  Rng rng = derived_rng(cfg.seed, a.index);
  FiltrationSequence seq = build_filtration(g, cfg.filtration, rng);
  std::vector<std::vector<Edge>> sets = seq.edge_sets;
  json lambdas = json::array();
  if (a.noise) {
    auto lam = lambda_schedule(cfg.train, seq.steps());
    NoisySequence noisy = noise_augment(seq, lam, rng);
    sets = noisy.edge_sets;
    lambdas = lam;
  }
  json counts = json::array(), thresholds = json::array(), edge_sets = json::array();
  for (const auto& s : sets) counts.push_back(s.size());
  for (double t : seq.thresholds) thresholds.push_back(std::isfinite(t) ? json(t) : json(t > 0 ? "inf" : "-inf"));
  if (a.edges) {
    for (const auto& s : sets) {
      json e = json::array();
      for (const auto& [u, v] : s) e.push_back({u, v});
      edge_sets.push_back(e);
    }
  }
  json out = {{"graph", a.index},
              {"n", g.num_nodes()},
              {"m", g.num_edges()},
              {"function", to_string(cfg.filtration.function)},
              {"schedule", to_string(cfg.filtration.schedule)},
              {"steps", seq.steps()},
              {"thresholds", thresholds},
              {"edge_counts", counts}};
  if (a.noise) out["lambdas"] = lambdas;
  if (a.edges) out["edge_sets"] = edge_sets;
  write_json(dir / "filtration.json", out);
  std::cout << out["edge_counts"].dump() << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, val, resume;
};

int train(const Common& c, const TrainArgs& a) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "train");
  auto graphs = load_gds(a.data);
  SequenceStore store = expand(graphs, cfg.filtration, cfg.train, threads_of(cfg));
  if (store.max_nodes > cfg.model.max_nodes) {
    throw ConfigError("model.max_nodes (" + std::to_string(cfg.model.max_nodes) +
                      ") is smaller than the largest training graph (" + std::to_string(store.max_nodes) + ")");
  }
  std::optional<SequenceStore> val_store;
  if (!a.val.empty()) {
    TrainConfig vcfg = cfg.train;
    vcfg.perturbations = 1;
    vcfg.seed = mix_seed(cfg.seed ^ 0x7a1);
    val_store = expand(load_gds(a.val), cfg.filtration, vcfg, threads_of(cfg));
  }

  std::unique_ptr<Model> model;
  std::optional<CheckpointData> resumed;
  long start = 0;
  if (!a.resume.empty()) {
    LoadedGenerator loaded = load_generator(a.resume);
    if (!(loaded.model->config() == cfg.model)) {
      throw DataError(DataError::Kind::kIncompatible, "incompatible checkpoint: model config differs from model section");
    }
    model = std::move(loaded.model);
    resumed = std::move(loaded.data);
    start = loaded.step;
  } else {
    model = std::make_unique<Model>(cfg.model, cfg.seed);
  }
  Stage1Trainer trainer(*model, cfg.train);
  if (resumed) {
    if (has_adam("generator/", *resumed)) import_adam(trainer.optimizer(), model->parameters(), "generator/", *resumed);
    if (!resumed->rng_state.empty()) set_rng_state(trainer.rng(), resumed->rng_state);
    trainer.set_steps_done(start);
  }

  auto val_nll = [&] {
    std::vector<const SequenceInput*> batch;
    for (const auto& in : val_store->inputs) batch.push_back(&in);
    return batch_nll(*model, batch, nullptr);
  };
  auto save = [&](const fs::path& p) {
    save_generator(p.string(), *model, &trainer.optimizer(), &trainer.rng(), trainer.steps_done());
  };

  std::ofstream log(dir / "train_log.jsonl", start > 0 ? std::ios::app : std::ios::trunc);
  double best = std::numeric_limits<double>::infinity();
  auto t0 = std::chrono::steady_clock::now();
  long remaining = std::max<long>(0, cfg.train.steps - start);
  trainer.train(store, static_cast<int>(remaining), [&](long step, const StepStats& s) {
    json row = {{"step", step}, {"loss", s.loss}, {"grad_norm", s.grad_norm}};
    bool eval = cfg.train.eval_every > 0 && step % cfg.train.eval_every == 0;
    if (eval) {
      save(dir / "stage1.anfm");
      if (val_store) {
        double v = val_nll();
        row["val_nll"] = v;
        if (v < best) {
          best = v;
          save(dir / "stage1_best.anfm");
        }
      }
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "step " << step << " loss " << s.loss << (val_store ? " val " + std::to_string(best) : "")
                << " (" << secs << " s)\n";
    }
    log << row.dump() << "\n";
  });
  save(dir / "stage1.anfm");
  std::cout << "trained to step " << trainer.steps_done() << ", checkpoint " << (dir / "stage1.anfm").string() << "\n";
  return 0;
}

struct FinetuneArgs {
  std::string checkpoint, data;
};

int finetune(const Common& c, const FinetuneArgs& a) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "finetune");
  LoadedGenerator loaded = load_generator(a.checkpoint);
  Model& model = *loaded.model;
  auto data = load_gds(a.data);
  GanState state(model, cfg.finetune);
  std::ofstream log(dir / "finetune_log.jsonl");
  gan_tuning(model, state, data, cfg.finetune, threads_of(cfg), [&](const IterationStats& s) {
    json row = {{"iteration", s.iteration},   {"mean_reward", s.mean_reward},
                {"disc_loss", s.disc_loss},   {"disc_accuracy", s.disc_accuracy},
                {"value_loss", s.value_loss}, {"ppo_loss", s.ppo.loss},
                {"mean_ratio", s.ppo.mean_ratio}, {"clip_fraction", s.ppo.clip_fraction}};
    log << row.dump() << std::endl;
  });
  save_generator((dir / "stage2.anfm").string(), model, nullptr, nullptr, loaded.step);
  std::cout << "fine-tuned for " << cfg.finetune.iterations << " iterations, checkpoint "
            << (dir / "stage2.anfm").string() << "\n";
  return 0;
}

struct SampleArgs {
  std::string checkpoint, data;
};

std::vector<Rollout> draw(const Model& model, const std::vector<int>& sizes, const RunConfig& cfg) {
  std::vector<Rollout> out(sizes.size());
  parallel_for(sizes.size(), threads_of(cfg), [&](std::size_t i) {
    Rng rng = derived_rng(cfg.seed, 0x5a3f0000 + i);
    out[i] = model.sample(sizes[i], rng, cfg.eval.mode);
  });
  return out;
}

int sample(const Common& c, const SampleArgs& a) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "sample");
  LoadedGenerator loaded = load_generator(a.checkpoint);
  auto rollouts = draw(*loaded.model, draw_sizes(cfg, a.data, cfg.eval.samples), cfg);
  std::vector<Graph> graphs;
  std::vector<double> seconds;
  for (const auto& r : rollouts) {
    graphs.push_back(r.final_graph());
    seconds.push_back(r.seconds);
  }
  save_gds((dir / "samples.gds").string(), graphs);
  save_jsonl((dir / "samples.jsonl").string(), graphs);
  write_json(dir / "sample_timing.json", {{"seconds_per_graph", row_stats(seconds)}, {"seconds", seconds}});
  std::cout << "wrote " << graphs.size() << " samples to " << (dir / "samples.gds").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string samples, checkpoint, reference, train, timing;
};

int evaluate(const Common& c, const EvalArgs& a) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "eval");
  std::vector<Graph> samples;
  json timing;
  if (!a.checkpoint.empty()) {
    LoadedGenerator loaded = load_generator(a.checkpoint);
    std::vector<double> seconds;
    for (const auto& r : draw(*loaded.model, draw_sizes(cfg, a.train, cfg.eval.samples), cfg)) {
      samples.push_back(r.final_graph());
      seconds.push_back(r.seconds);
    }
    timing = row_stats(seconds);
  } else if (!a.samples.empty()) {
    samples = load_gds(a.samples);
    if (!a.timing.empty()) {
      std::ifstream in(a.timing);
      json t = json::parse(in, nullptr, false);
      if (t.is_discarded() || !t.contains("seconds_per_graph")) {
        throw DataError(DataError::Kind::kMalformed, "'" + a.timing + "' is not a sample timing file");
      }
      timing = t["seconds_per_graph"];
    }
  } else {
    throw ConfigError("eval needs --samples or --checkpoint");
  }
  auto reference = load_gds(a.reference);
  std::size_t threads = threads_of(cfg);

  json report = {{"samples", samples.size()}, {"reference", reference.size()}};
  json mmd = json::object();
  for (DescriptorKind kind : kAllDescriptors) {
    Kernel k = default_kernel(kind);
    MmdResult r = mmd2(descriptors(samples, kind, threads), descriptors(reference, kind, threads), k, threads);
    mmd[to_string(kind)] = {{"value", r.value}, {"kernel", r.kernel}, {"n", r.n}, {"m", r.m}};
  }
  report["mmd"] = mmd;
  if (!a.train.empty()) {
    VunResult v = vun(samples, load_gds(a.train), cfg.dataset.family, cfg.dataset.sbm);
    report["vun"] = {{"family", to_string(cfg.dataset.family)},
                     {"valid", v.valid},
                     {"unique", v.unique},
                     {"novel", v.novel},
                     {"vun", v.vun},
                     {"std", v.std},
                     {"n", v.n}};
  }
  if (!timing.is_null()) report["seconds_per_graph"] = timing;
  write_json(dir / "eval_report.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

struct BenchArgs {
  std::string checkpoint;
  int n = 20;
  std::vector<int> steps{8, 16, 32, 64};
  int rollouts = 4;
  int repetitions = 5;
};

int bench(const Common& c, const BenchArgs& a) {
  RunConfig cfg = resolve(c);
  fs::path dir = prepare_output(cfg, "bench");
  std::unique_ptr<Model> owned;
  const Model* model;
  if (!a.checkpoint.empty()) {
    owned = std::move(load_generator(a.checkpoint).model);
  } else {
    owned = std::make_unique<Model>(cfg.model, cfg.seed);
  }
  model = owned.get();
  auto rows = bench_sampling(*model, a.n, a.steps, a.rollouts, a.repetitions, cfg.seed);
  std::vector<double> x, y;
  json out = json::array();
  for (const auto& r : rows) {
    x.push_back(r.steps);
    y.push_back(r.median);
    out.push_back({{"steps", r.steps}, {"n", r.n}, {"median", r.median}, {"mad", r.mad}});
  }
  json report = {{"temporal", to_string(model->config().temporal)}, {"rows", out}};
  if (rows.size() >= 3) {
    QuadraticFit fit = fit_quadratic(x, y);
    report["fit"] = {{"a", fit.a}, {"b", fit.b}, {"c", fit.c}};
  }
  write_json(dir / "bench.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace
}  // namespace anfm::cli

int main(int argc, char** argv) {
  using namespace anfm::cli;
  CLI::App app{"anfm: noisy filtration graph generation"};
  app.require_subcommand(1);

  Common common;
  FiltrateArgs filtrate_args;
  TrainArgs train_args;
  FinetuneArgs finetune_args;
  SampleArgs sample_args;
  EvalArgs eval_args;
  BenchArgs bench_args;
  std::function<int()> run;
  auto& ov = common.overrides;

  auto* dataset = app.add_subcommand("dataset", "Dataset tools");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "Generate train/val/test splits as GDS1 and JSON lines");
  add_common(gen, common);
  ov.add(gen, "--family", "dataset.family", "planar, sbm or lobster");
  ov.add(gen, "--train", "dataset.train", "Training graphs");
  ov.add(gen, "--val", "dataset.val", "Validation graphs");
  ov.add(gen, "--test", "dataset.test", "Test graphs");
  gen->callback([&] { run = [&] { return dataset_gen(common); }; });

  auto add_filtration_flags = [&](CLI::App* cmd) {
    ov.add(cmd, "--function", "filtration.function", "line_fiedler, dfs, betweenness or remoteness");
    ov.add(cmd, "--steps", "filtration.steps", "Filtration length T");
    ov.add(cmd, "--schedule", "filtration.schedule", "linear, convex, concave or dfs_linear");
  };

  auto* filt = app.add_subcommand("filtrate", "Dump the filtration of one graph");
  add_common(filt, common);
  add_filtration_flags(filt);
  filt->add_option("-i,--input", filtrate_args.input, "GDS1 file")->required();
  filt->add_option("--index", filtrate_args.index, "Graph index in the file");
  filt->add_flag("--edges", filtrate_args.edges, "Include per-step edge lists");
  filt->add_flag("--noise", filtrate_args.noise, "Apply noise augmentation with the train lambda schedule");
  filt->callback([&] { run = [&] { return filtrate(common, filtrate_args); }; });

  auto* tr = app.add_subcommand("train", "Stage-I teacher-forcing training");
  add_common(tr, common);
  add_filtration_flags(tr);
  tr->add_option("-d,--data", train_args.data, "Training graphs (GDS1)")->required();
  tr->add_option("--val", train_args.val, "Validation graphs; keeps the checkpoint with minimal validation NLL");
  tr->add_option("--resume", train_args.resume, "Resume from a stage-I checkpoint");
  ov.add(tr, "--train-steps", "train.steps", "Optimizer steps");
  ov.add(tr, "--batch-size", "train.batch_size", "Batch size");
  ov.add(tr, "--lr", "train.lr", "Learning rate");
  ov.add(tr, "--eval-every", "train.eval_every", "Checkpoint and validation cadence");
  ov.add(tr, "--perturbations", "train.perturbations", "Noisy sequences per graph");
  tr->callback([&] { run = [&] { return train(common, train_args); }; });

  auto* ft = app.add_subcommand("finetune", "Stage-II adversarial fine-tuning");
  add_common(ft, common);
  ft->add_option("--checkpoint", finetune_args.checkpoint, "Stage-I checkpoint")->required();
  ft->add_option("-d,--data", finetune_args.data, "Real graphs (GDS1)")->required();
  ov.add(ft, "--iterations", "finetune.iterations", "PPO iterations");
  ov.add(ft, "--samples", "finetune.samples", "Rollouts per iteration");
  ov.add(ft, "--lr", "finetune.lr", "Generator learning rate");
  ft->callback([&] { run = [&] { return finetune(common, finetune_args); }; });

  auto* sm = app.add_subcommand("sample", "Draw graphs from a checkpoint");
  add_common(sm, common);
  sm->add_option("--checkpoint", sample_args.checkpoint, "Generator checkpoint")->required();
  sm->add_option("-d,--data", sample_args.data, "Training graphs for the size distribution");
  ov.add(sm, "--count", "eval.samples", "Number of graphs");
  ov.add(sm, "--n", "eval.fixed_nodes", "Fixed node count");
  ov.add(sm, "--mode", "eval.mode", "stochastic or component_mode");
  sm->callback([&] { run = [&] { return sample(common, sample_args); }; });

  auto* ev = app.add_subcommand("eval", "MMD, VUN and timing report");
  add_common(ev, common);
  auto* src = ev->add_option("--samples", eval_args.samples, "Generated graphs (GDS1)");
  ev->add_option("--checkpoint", eval_args.checkpoint, "Sample from this checkpoint instead")->excludes(src);
  ev->add_option("-r,--reference", eval_args.reference, "Reference graphs (GDS1)")->required();
  ev->add_option("--train", eval_args.train, "Training graphs for novelty and sample sizes");
  ev->add_option("--timing", eval_args.timing, "sample_timing.json written by `sample`");
  ov.add(ev, "--family", "dataset.family", "Validity family");
  ov.add(ev, "--count", "eval.samples", "Samples drawn with --checkpoint");
  ov.add(ev, "--n", "eval.fixed_nodes", "Fixed node count");
  ev->callback([&] { run = [&] { return evaluate(common, eval_args); }; });

  auto* bn = app.add_subcommand("bench", "Sampling time versus T");
  add_common(bn, common);
  bn->add_option("--checkpoint", bench_args.checkpoint, "Generator checkpoint (default: untrained model)");
  bn->add_option("--n", bench_args.n, "Node count");
  bn->add_option("--steps", bench_args.steps, "T values")->delimiter(',');
  bn->add_option("--rollouts", bench_args.rollouts, "Graphs per timing");
  bn->add_option("--repetitions", bench_args.repetitions, "Timings per T");
  ov.add(bn, "--temporal", "model.temporal", "causal or first_order");
  ov.add(bn, "--hidden", "model.hidden", "Hidden width");
  bn->callback([&] { run = [&] { return bench(common, bench_args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run();
  } catch (const anfm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const anfm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const anfm::GraphError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const anfm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }
}
