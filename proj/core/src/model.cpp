#include "anfm/model.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "anfm/errors.hpp"
#include "anfm/spectral.hpp"

namespace anfm {

std::string to_string(TemporalMode m) { return m == TemporalMode::kCausal ? "causal" : "first_order"; }

TemporalMode parse_temporal_mode(const std::string& s) {
  if (s == "causal") return TemporalMode::kCausal;
  if (s == "first_order") return TemporalMode::kFirstOrder;
  throw ConfigError("unknown temporal mode '" + s + "'");
}

void ModelConfig::validate() const {
  if (hidden < 2 || hidden % 2 != 0) throw ConfigError("model.hidden must be a positive even number");
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (heads < 1 || hidden % heads != 0) throw ConfigError("model.heads must divide model.hidden");
  if (components < 1) throw ConfigError("model.components must be >= 1");
  if (steps < 1) throw ConfigError("model.steps must be >= 1");
  if (max_nodes < 1) throw ConfigError("model.max_nodes must be >= 1");
}

std::string to_json(const ModelConfig& cfg) {
  nlohmann::json j = {{"hidden", cfg.hidden},       {"layers", cfg.layers}, {"heads", cfg.heads},
                      {"components", cfg.components}, {"steps", cfg.steps},   {"max_nodes", cfg.max_nodes},
                      {"temporal", to_string(cfg.temporal)}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be an object");
  ModelConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "hidden") cfg.hidden = value.get<int>();
      else if (key == "layers") cfg.layers = value.get<int>();
      else if (key == "heads") cfg.heads = value.get<int>();
      else if (key == "components") cfg.components = value.get<int>();
      else if (key == "steps") cfg.steps = value.get<int>();
      else if (key == "max_nodes") cfg.max_nodes = value.get<int>();
      else if (key == "temporal") cfg.temporal = parse_temporal_mode(value.get<std::string>());
      else throw ConfigError("unknown key model." + key);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("model." + key + " has the wrong type");
    }
  }
  cfg.validate();
  return cfg;
}

StepBlock make_step_block(const std::vector<Graph>& graphs, int t0, const NodeOrdering& ordering) {
  if (graphs.empty()) throw std::invalid_argument("make_step_block: no graphs");
  StepBlock b;
  b.n = graphs.front().num_nodes();
  b.t0 = t0;
  b.count = static_cast<int>(graphs.size());
  const int n = b.n;
  if (ordering.size() != n) throw GraphError("node ordering size does not match the graph");
  std::vector<double> feat(static_cast<std::size_t>(b.count) * n * kInputFeatures);
  auto rg = std::make_shared<RowGraph>();
  rg->offsets.push_back(0);
  auto groups = std::make_shared<AttentionGroups>();
  for (int s = 0; s < b.count; ++s) {
    const Graph& g = graphs[s];
    if (g.num_nodes() != n) throw GraphError("graphs in a block must share the node set");
    const NodeFeatures nf = node_features(g);
    for (int i = 0; i < n; ++i) {
      double* row = &feat[(static_cast<std::size_t>(s) * n + i) * kInputFeatures];
      for (int c = 0; c < kLapPeDim; ++c) *row++ = nf.lap_pe[i * kLapPeDim + c];
      for (int c = 0; c < kRwpeDim; ++c) *row++ = nf.rwpe[i * kRwpeDim + c];
      for (int c = 0; c < 3; ++c) *row++ = std::log1p(nf.cycle_counts[i * 3 + c]);
      b.rank_rows.push_back(ordering.rank[i]);
      for (int j : g.neighbors(i)) rg->indices.push_back(s * n + j);
      rg->offsets.push_back(static_cast<int>(rg->indices.size()));
    }
    for (double total : nf.graph_cycle_totals) b.conditioning.push_back(std::log1p(total));
    AttentionGroup grp;
    for (int i = 0; i < n; ++i) grp.query_rows.push_back(s * n + i);
    grp.key_rows = grp.query_rows;
    groups->push_back(std::move(grp));
  }
  b.features = Tensor(b.count * n, kInputFeatures, std::move(feat));
  b.graph = std::move(rg);
  b.structural = std::move(groups);
  return b;
}

SequenceInput prepare_sequence(const NoisySequence& seq, const NodeOrdering* ordering) {
  const int T = seq.steps();
  if (T < 1) throw std::invalid_argument("prepare_sequence: sequence has no steps");
  std::vector<Graph> inputs;
  auto targets = std::make_shared<AdjacencyList>();
  for (int t = 0; t < T; ++t) inputs.push_back(seq.graph_at(t));
  for (int t = 1; t <= T; ++t) targets->push_back(seq.graph_at(t).adjacency());
  const NodeOrdering ident = NodeOrdering::identity(seq.n);
  SequenceInput in;
  in.block = make_step_block(inputs, 0, ordering ? *ordering : ident);
  in.targets = std::move(targets);
  return in;
}

Backbone::Backbone(ParameterStore& store, const std::string& prefix, const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  const int D = cfg.hidden;
  input_ = make_linear(store, prefix + "input", kInputFeatures, D, rng, false);
  node_embedding_ = store.uniform(prefix + "node_embedding", cfg.max_nodes, D, 1.0 / std::sqrt(D), rng);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = prefix + "layer" + std::to_string(l) + ".";
    Layer L;
    L.ln_struct = make_layernorm(store, p + "ln_struct", D);
    L.gin = make_feedforward(store, p + "gin", D, D, D, rng);
    L.q = make_linear(store, p + "q", 2 * D, D, rng);
    L.k = make_linear(store, p + "k", 2 * D, D, rng);
    L.v = make_linear(store, p + "v", D, D, rng);
    L.o = make_linear(store, p + "o", D, D, rng);
    L.film = make_linear(store, p + "film", D + 3, 2 * D, rng, true, 0.5);
    L.ln_struct_ff = make_layernorm(store, p + "ln_struct_ff", D);
    L.ff_struct = make_feedforward(store, p + "ff_struct", D, 2 * D, D, rng);
    if (cfg.temporal == TemporalMode::kCausal) {
      L.ln_temp = make_layernorm(store, p + "ln_temp", D);
      L.tq = make_linear(store, p + "tq", D, D, rng);
      L.tk = make_linear(store, p + "tk", D, D, rng);
      L.tv = make_linear(store, p + "tv", D, D, rng);
      L.to = make_linear(store, p + "to", D, D, rng);
    }
    L.ln_temp_ff = make_layernorm(store, p + "ln_temp_ff", D);
    L.ff_temp = make_feedforward(store, p + "ff_temp", D, 2 * D, D, rng);
    layers_.push_back(std::move(L));
  }
  final_ln_ = make_layernorm(store, prefix + "final_ln", D);
}

Tensor Backbone::forward(const StepBlock& block, Cache* cache) const {
  const int D = cfg_.hidden, n = block.n, S = block.count;
  if (n > cfg_.max_nodes) {
    throw GraphError("graph has " + std::to_string(n) + " nodes but the model supports at most " +
                     std::to_string(cfg_.max_nodes));
  }
  const int past = cache ? cache->steps : 0;
  if (cache && past != block.t0) throw std::invalid_argument("Backbone: cache does not end at the block start");

  std::vector<double> cond;
  cond.reserve(static_cast<std::size_t>(S) * (D + 3));
  for (int s = 0; s < S; ++s) {
    const auto e = sinusoidal_embedding(block.t0 + s, D);
    cond.insert(cond.end(), e.begin(), e.end());
    for (int c = 0; c < 3; ++c) cond.push_back(block.conditioning[s * 3 + c]);
  }
  const Tensor cond_t(S, D + 3, std::move(cond));
  std::vector<int> row_step(static_cast<std::size_t>(S) * n);
  for (int r = 0; r < S * n; ++r) row_step[r] = r / std::max(n, 1);

  auto temporal = std::make_shared<AttentionGroups>();
  if (cfg_.temporal == TemporalMode::kCausal) {
    for (int i = 0; i < n; ++i) {
      AttentionGroup g;
      g.causal = true;
      for (int s = 0; s < S; ++s) g.query_rows.push_back(s * n + i);
      for (int s = 0; s < past + S; ++s) g.key_rows.push_back(s * n + i);
      temporal->push_back(std::move(g));
    }
  }
  if (cache && cache->keys.empty()) {
    cache->keys.resize(layers_.size());
    cache->values.resize(layers_.size());
  }

  Tensor h = add(input_(block.features), gather_rows(node_embedding_, block.rank_rows));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    Tensor x = L.ln_struct(h);
    Tensor gin = L.gin(add(x, neighbor_sum(x, block.graph)));
    Tensor xg = concat_cols({x, gin});
    Tensor s = add(L.o(attention(L.q(xg), L.k(xg), L.v(x), cfg_.heads, block.structural)), gin);
    Tensor film = gather_rows(L.film(cond_t), row_step);
    s = add(add(s, mul(s, slice_cols(film, 0, D))), slice_cols(film, D, 2 * D));
    h = add(h, s);
    h = add(h, L.ff_struct(L.ln_struct_ff(h)));
    if (cfg_.temporal == TemporalMode::kCausal) {
      Tensor xt = L.ln_temp(h);
      Tensor k = L.tk(xt), v = L.tv(xt);
      if (cache) {
        cache->keys[l].push_back(k);
        cache->values[l].push_back(v);
        k = concat_rows(cache->keys[l]);
        v = concat_rows(cache->values[l]);
      }
      h = add(h, L.to(attention(L.tq(xt), k, v, cfg_.heads, temporal)));
    }
    h = add(h, L.ff_temp(L.ln_temp_ff(h)));
  }
  if (cache) cache->steps += S;
  return final_ln_(h);
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double guarded_log(double x) { return x > 0.0 ? std::log(x) : kLogZeroGuard; }

std::shared_ptr<const std::vector<int>> step_offsets(int n, int count) {
  auto off = std::make_shared<std::vector<int>>();
  for (int s = 0; s <= count; ++s) off->push_back(s * n);
  return off;
}

}  // namespace

EdgeDistribution EdgeDistribution::from_logits(std::vector<double> pi, std::vector<double> logits, int n) {
  EdgeDistribution d;
  d.n = n;
  d.components = static_cast<int>(pi.size());
  const std::size_t sz = static_cast<std::size_t>(d.components) * n * n;
  if (logits.size() != sz) throw std::invalid_argument("EdgeDistribution: logits must be K x n x n");
  d.pi = std::move(pi);
  d.p.assign(sz, 0.0);
  d.log_p.assign(sz, 0.0);
  d.log_1mp.assign(sz, 0.0);
  for (int k = 0; k < d.components; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::size_t a = (static_cast<std::size_t>(k) * n + i) * n + j;
        if (i == j) {
          d.log_p[a] = kLogZeroGuard;
          continue;
        }
        const double z = logits[a];
        d.p[a] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        d.log_p[a] = -softplus(-z);
        d.log_1mp[a] = -softplus(z);
      }
    }
  }
  d.logits = std::move(logits);
  return d;
}

EdgeDistribution EdgeDistribution::from_probabilities(std::vector<double> pi, std::vector<double> p, int n) {
  EdgeDistribution d;
  d.n = n;
  d.components = static_cast<int>(pi.size());
  const std::size_t sz = static_cast<std::size_t>(d.components) * n * n;
  if (p.size() != sz) throw std::invalid_argument("EdgeDistribution: p must be K x n x n");
  d.pi = std::move(pi);
  d.p = std::move(p);
  d.log_p.resize(sz);
  d.log_1mp.resize(sz);
  for (std::size_t a = 0; a < sz; ++a) {
    const int i = static_cast<int>((a / n) % n), j = static_cast<int>(a % n);
    if (i == j) d.p[a] = 0.0;
    if (d.p[a] < 0.0 || d.p[a] > 1.0) throw std::invalid_argument("EdgeDistribution: probability outside [0, 1]");
    d.log_p[a] = guarded_log(d.p[a]);
    d.log_1mp[a] = d.p[a] < 1.0 ? std::log1p(-d.p[a]) : kLogZeroGuard;
  }
  return d;
}

double step_log_likelihood(const EdgeDistribution& dist, const Graph& target, bool* guarded) {
  const int n = dist.n;
  if (target.num_nodes() != n) throw GraphError("target node count does not match the distribution");
  const auto& y = target.adjacency();
  bool hit = false;
  std::vector<double> terms;
  for (int k = 0; k < dist.components; ++k) {
    if (dist.pi[k] <= 0.0) continue;
    double s = std::log(dist.pi[k]);
    bool comp_hit = false;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const std::size_t a = (static_cast<std::size_t>(k) * n + i) * n + j;
        const double lp = y[static_cast<std::size_t>(i) * n + j] ? dist.log_p[a] : dist.log_1mp[a];
        if (lp <= kLogZeroGuard) comp_hit = true;
        s += lp;
      }
    }
    if (comp_hit) {
      hit = true;
      continue;
    }
    terms.push_back(s);
  }
  if (guarded) *guarded = hit;
  if (terms.empty()) return kLogZeroGuard;
  double mx = terms.front();
  for (double t : terms) mx = std::max(mx, t);
  double z = 0.0;
  for (double t : terms) z += std::exp(t - mx);
  return mx + std::log(z);
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng = derived_rng(seed, 0);
  backbone_ = Backbone(store_, "backbone.", cfg, rng);
  const int D = cfg.hidden;
  for (int k = 0; k < cfg.components; ++k) {
    const std::string p = "decoder.component" + std::to_string(k) + ".";
    components_.push_back({make_linear(store_, p + "dense1", D, 2 * D, rng),
                           make_linear(store_, p + "dense2", 2 * D, 2 * D, rng),
                           make_linear(store_, p + "dense3", 2 * D, 2 * D, rng, true, 0.1)});
  }
  mix1_ = make_linear(store_, "decoder.mix1", D, D, rng);
  mix2_ = make_linear(store_, "decoder.mix2", D, D, rng);
  mix3_ = make_linear(store_, "decoder.mix3", D, cfg.components, rng);
}

Model::Decoded Model::decode(const Tensor& reps, int n, int count) const {
  const int D = cfg_.hidden;
  std::vector<Tensor> blocks;
  for (const Component& c : components_) {
    Tensor h = relu(c.dense2(relu(c.dense1(reps))));
    Tensor o = c.dense3(h);
    Tensor x = concat_cols({slice_cols(h, 0, D), scale(slice_cols(h, D, 2 * D), -1.0)});
    blocks.push_back(pair_logits(x, o, n));
  }
  Decoded d;
  d.logits = blocks.size() == 1 ? blocks.front() : concat_rows(blocks);
  Tensor pooled = segment_mean(relu(mix1_(reps)), step_offsets(n, count));
  d.log_pi = log_softmax_rows(mix3_(relu(mix2_(pooled))));
  return d;
}

namespace {

// Combines [1, K count] component log-likelihoods with log pi [count, K] into [count, 1].
Tensor mixture_loglik(const Tensor& comp, const Tensor& log_pi) {
  const int count = log_pi.rows(), K = log_pi.cols();
  return logsumexp_rows(add(transpose(reshape(comp, K, count)), log_pi));
}

}  // namespace

Tensor Model::sequence_log_likelihood(const SequenceInput& in) const {
  const int n = in.n(), T = in.steps();
  if (static_cast<int>(in.targets->size()) != T) throw std::invalid_argument("sequence input targets do not match steps");
  Tensor reps = backbone_.forward(in.block);
  Decoded d = decode(reps, n, T);
  return mixture_loglik(bernoulli_loglik(d.logits, n, in.targets), d.log_pi);
}

EdgeDistribution Model::distribution(const SequenceInput& in, int t) const {
  NoGrad guard;
  const int n = in.n(), T = in.steps(), K = cfg_.components;
  if (t < 0 || t >= T) throw std::out_of_range("distribution: step out of range");
  Decoded d = decode(backbone_.forward(in.block), n, T);
  std::vector<double> pi(K), logits(static_cast<std::size_t>(K) * n * n);
  for (int k = 0; k < K; ++k) {
    pi[k] = std::exp(d.log_pi(t, k));
    const auto& src = d.logits.data();
    const std::size_t off = static_cast<std::size_t>(k * T + t) * n * n;
    std::copy(src.begin() + off, src.begin() + off + static_cast<std::size_t>(n) * n,
              logits.begin() + static_cast<std::size_t>(k) * n * n);
  }
  return EdgeDistribution::from_logits(std::move(pi), std::move(logits), n);
}

Rollout Model::sample(int n, Rng& rng, SampleMode mode, int steps) const {
  if (n < 1) throw GraphError("sample: n must be >= 1");
  if (n > cfg_.max_nodes) throw GraphError("sample: n exceeds max_nodes");
  NoGrad guard;
  const auto start = std::chrono::steady_clock::now();
  const int T = steps > 0 ? steps : cfg_.steps, K = cfg_.components;
  const NodeOrdering ident = NodeOrdering::identity(n);
  Rollout r;
  r.sequence.n = n;
  r.sequence.edge_sets.resize(T + 1);
  r.sequence.lambdas.assign(T + 1, 0.0);
  Backbone::Cache cache;
  Graph current(n);
  for (int s = 0; s < T; ++s) {
    const StepBlock block = make_step_block({current}, s, ident);
    Decoded d = decode(backbone_.forward(block, &cache), n, 1);
    double u = uniform01(rng), acc = 0.0;
    int k = K - 1;
    for (int c = 0; c < K; ++c) {
      acc += std::exp(d.log_pi(0, c));
      if (u < acc) {
        k = c;
        break;
      }
    }
    std::vector<Edge> edges;
    auto adj = std::make_shared<AdjacencyList>(1, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n, 0));
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double z = d.logits(k * n + i, j);
        bool on;
        if (mode == SampleMode::kStochastic) {
          on = uniform01(rng) < (z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)));
        } else {
          on = z > 0.0;
        }
        if (on) {
          edges.emplace_back(i, j);
          (*adj)[0][static_cast<std::size_t>(i) * n + j] = (*adj)[0][static_cast<std::size_t>(j) * n + i] = 1;
        }
      }
    }
    r.step_log_probs.push_back(mixture_loglik(bernoulli_loglik(d.logits, n, adj), d.log_pi).item());
    current = Graph(n, edges);
    r.sequence.edge_sets[s + 1] = std::move(edges);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ValueModel::ValueModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg.validate();
  Rng rng = derived_rng(seed, 1);
  backbone_ = Backbone(store_, "backbone.", cfg, rng);
  head_ = make_linear(store_, "head", cfg.hidden, 1, rng);
}

Tensor ValueModel::values(const SequenceInput& in) const {
  Tensor reps = backbone_.forward(in.block);
  return head_(segment_mean(reps, step_offsets(in.n(), in.steps())));
}

}  // namespace anfm
