#include "run_config.hpp"

#include <fstream>
#include <set>

#include "anfm/errors.hpp"

namespace anfm::cli {

using nlohmann::json;

namespace {

// Reads keys of one object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(name() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(join(key) + " has the wrong type");
    }
  }

  template <typename Parse, typename T>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, s);
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError(join(key) + ": " + e.what());
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), join(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key " + join(key));
    }
  }

 private:
  std::string name() const { return path_.empty() ? "config" : path_; }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SampleMode parse_mode(const std::string& s) {
  if (s == "stochastic") return SampleMode::kStochastic;
  if (s == "component_mode") return SampleMode::kComponentMode;
  throw ConfigError("unknown sample mode '" + s + "'");
}

std::string mode_name(SampleMode m) { return m == SampleMode::kStochastic ? "stochastic" : "component_mode"; }

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  dataset.seed = s;
  filtration.seed = s;
  train.seed = s;
  finetune.seed = s;
}

void RunConfig::validate() const {
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (eval.samples < 1) throw ConfigError("eval.samples must be >= 1");
  if (eval.fixed_nodes < 0) throw ConfigError("eval.fixed_nodes must be >= 0");
  dataset.validate();
  filtration.validate();
  model.validate();
  train.validate();
  finetune.validate();
  if (model.steps != filtration.steps) throw ConfigError("model.steps must equal filtration.steps");
}

RunConfig parse_run_config(const json& j, RunConfig cfg) {
  Section root(j, "");
  if (root.has("seed")) {
    std::uint64_t s = cfg.seed;
    root.get("seed", s);
    cfg.apply_seed(s);
  }
  root.get("output_dir", cfg.output_dir);
  root.get("threads", cfg.threads);
  if (root.has("dataset")) {
    Section d = root.child("dataset");
    d.get_enum("family", cfg.dataset.family, parse_family);
    d.get("train", cfg.dataset.train);
    d.get("val", cfg.dataset.val);
    d.get("test", cfg.dataset.test);
    d.get("max_rejections", cfg.dataset.max_rejections);
    if (d.has("planar")) {
      Section p = d.child("planar");
      p.get("num_points", cfg.dataset.planar.num_points);
      p.finish();
    }
    if (d.has("sbm")) {
      Section s = d.child("sbm");
      s.get("min_communities", cfg.dataset.sbm.min_communities);
      s.get("max_communities", cfg.dataset.sbm.max_communities);
      s.get("min_size", cfg.dataset.sbm.min_size);
      s.get("max_size", cfg.dataset.sbm.max_size);
      s.get("p_intra", cfg.dataset.sbm.p_intra);
      s.get("p_inter", cfg.dataset.sbm.p_inter);
      s.finish();
    }
    if (d.has("lobster")) {
      Section l = d.child("lobster");
      l.get("backbone_mean", cfg.dataset.lobster.backbone_mean);
      l.get("p1", cfg.dataset.lobster.p1);
      l.get("p2", cfg.dataset.lobster.p2);
      l.get("min_nodes", cfg.dataset.lobster.min_nodes);
      l.get("max_nodes", cfg.dataset.lobster.max_nodes);
      l.finish();
    }
    d.finish();
  }
  if (root.has("filtration")) {
    Section f = root.child("filtration");
    f.get_enum("function", cfg.filtration.function, parse_filtration_function);
    f.get("steps", cfg.filtration.steps);
    f.get_enum("schedule", cfg.filtration.schedule, parse_schedule);
    f.finish();
  }
  if (root.has("model")) {
    Section m = root.child("model");
    m.get("hidden", cfg.model.hidden);
    m.get("layers", cfg.model.layers);
    m.get("heads", cfg.model.heads);
    m.get("components", cfg.model.components);
    m.get("steps", cfg.model.steps);
    m.get("max_nodes", cfg.model.max_nodes);
    m.get_enum("temporal", cfg.model.temporal, parse_temporal_mode);
    m.finish();
  }
  if (root.has("train")) {
    Section t = root.child("train");
    t.get("steps", cfg.train.steps);
    t.get("batch_size", cfg.train.batch_size);
    t.get("lr", cfg.train.lr);
    t.get("grad_clip", cfg.train.grad_clip);
    t.get("perturbations", cfg.train.perturbations);
    t.get("noise", cfg.train.noise);
    t.get("lambda_first", cfg.train.lambda_first);
    t.get("lambda_last", cfg.train.lambda_last);
    t.get("ordering_sigma", cfg.train.ordering_sigma);
    t.get("eval_every", cfg.train.eval_every);
    t.finish();
  }
  if (root.has("finetune")) {
    Section f = root.child("finetune");
    auto& p = cfg.finetune;
    f.get("clip_eps", p.clip_eps);
    f.get("reward_floor", p.reward_floor);
    f.get("epochs", p.epochs);
    f.get("samples", p.samples);
    f.get("lr", p.lr);
    f.get("ema_decay", p.ema_decay);
    f.get("iterations", p.iterations);
    f.get("grad_clip", p.grad_clip);
    f.get("disc_pretrain_steps", p.disc_pretrain_steps);
    f.get("value_pretrain_steps", p.value_pretrain_steps);
    f.get("disc_steps", p.disc_steps);
    f.get("value_steps", p.value_steps);
    f.get("value_hidden", p.value_hidden);
    f.get("value_layers", p.value_layers);
    f.get("value_lr", p.value_lr);
    if (f.has("disc")) {
      Section d = f.child("disc");
      d.get("layers", p.disc.layers);
      d.get("hidden", p.disc.hidden);
      d.get("lr", p.disc.lr);
      d.finish();
    }
    f.finish();
  }
  if (root.has("eval")) {
    Section e = root.child("eval");
    e.get("samples", cfg.eval.samples);
    e.get("fixed_nodes", cfg.eval.fixed_nodes);
    e.get_enum("mode", cfg.eval.mode, parse_mode);
    e.finish();
  }
  root.finish();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  const auto& p = c.finetune;
  return json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
      {"dataset",
       {{"family", to_string(d.family)},
        {"train", d.train},
        {"val", d.val},
        {"test", d.test},
        {"max_rejections", d.max_rejections},
        {"planar", {{"num_points", d.planar.num_points}}},
        {"sbm",
         {{"min_communities", d.sbm.min_communities},
          {"max_communities", d.sbm.max_communities},
          {"min_size", d.sbm.min_size},
          {"max_size", d.sbm.max_size},
          {"p_intra", d.sbm.p_intra},
          {"p_inter", d.sbm.p_inter}}},
        {"lobster",
         {{"backbone_mean", d.lobster.backbone_mean},
          {"p1", d.lobster.p1},
          {"p2", d.lobster.p2},
          {"min_nodes", d.lobster.min_nodes},
          {"max_nodes", d.lobster.max_nodes}}}}},
      {"filtration",
       {{"function", to_string(c.filtration.function)},
        {"steps", c.filtration.steps},
        {"schedule", to_string(c.filtration.schedule)}}},
      {"model", json::parse(anfm::to_json(c.model))},
      {"train",
       {{"steps", c.train.steps},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"grad_clip", c.train.grad_clip},
        {"perturbations", c.train.perturbations},
        {"noise", c.train.noise},
        {"lambda_first", c.train.lambda_first},
        {"lambda_last", c.train.lambda_last},
        {"ordering_sigma", c.train.ordering_sigma},
        {"eval_every", c.train.eval_every}}},
      {"finetune",
       {{"clip_eps", p.clip_eps},
        {"reward_floor", p.reward_floor},
        {"epochs", p.epochs},
        {"samples", p.samples},
        {"lr", p.lr},
        {"ema_decay", p.ema_decay},
        {"iterations", p.iterations},
        {"grad_clip", p.grad_clip},
        {"disc_pretrain_steps", p.disc_pretrain_steps},
        {"value_pretrain_steps", p.value_pretrain_steps},
        {"disc_steps", p.disc_steps},
        {"value_steps", p.value_steps},
        {"value_hidden", p.value_hidden},
        {"value_layers", p.value_layers},
        {"value_lr", p.value_lr},
        {"disc", {{"layers", p.disc.layers}, {"hidden", p.disc.hidden}, {"lr", p.disc.lr}}}}},
      {"eval",
       {{"samples", c.eval.samples}, {"fixed_nodes", c.eval.fixed_nodes}, {"mode", mode_name(c.eval.mode)}}}};
}

}  // namespace anfm::cli
