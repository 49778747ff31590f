#include "anfm/filtration.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>

#include "anfm/errors.hpp"
#include "anfm/spectral.hpp"

namespace anfm {

std::string to_string(FiltrationFunction f) {
  switch (f) {
    case FiltrationFunction::kLineFiedler: return "line_fiedler";
    case FiltrationFunction::kDfs: return "dfs";
    case FiltrationFunction::kBetweenness: return "betweenness";
    case FiltrationFunction::kRemoteness: return "remoteness";
  }
  return "unknown";
}

std::string to_string(Schedule s) {
  switch (s) {
    case Schedule::kLinear: return "linear";
    case Schedule::kConvex: return "convex";
    case Schedule::kConcave: return "concave";
    case Schedule::kDfsLinear: return "dfs_linear";
  }
  return "unknown";
}

FiltrationFunction parse_filtration_function(const std::string& s) {
  if (s == "line_fiedler" || s == "fiedler") return FiltrationFunction::kLineFiedler;
  if (s == "dfs") return FiltrationFunction::kDfs;
  if (s == "betweenness") return FiltrationFunction::kBetweenness;
  if (s == "remoteness") return FiltrationFunction::kRemoteness;
  throw ConfigError("unknown filtration function '" + s + "'");
}

Schedule parse_schedule(const std::string& s) {
  if (s == "linear") return Schedule::kLinear;
  if (s == "convex") return Schedule::kConvex;
  if (s == "concave") return Schedule::kConcave;
  if (s == "dfs_linear") return Schedule::kDfsLinear;
  throw ConfigError("unknown schedule '" + s + "'");
}

void FiltrationConfig::validate() const {
  if (steps < 2) throw ConfigError("filtration.steps must be >= 2");
  const bool dfs = function == FiltrationFunction::kDfs;
  if (dfs != (schedule == Schedule::kDfsLinear)) {
    throw ConfigError("filtration.schedule '" + to_string(schedule) + "' does not apply to function '" +
                      to_string(function) + "'");
  }
}

double schedule_gamma(Schedule s, double x) {
  switch (s) {
    case Schedule::kLinear:
    case Schedule::kDfsLinear: return x;
    case Schedule::kConvex: return 1.0 - std::cos(std::numbers::pi * x / 2.0);
    case Schedule::kConcave: return std::sin(std::numbers::pi * x / 2.0);
  }
  return x;
}

namespace {

// Brandes accumulation of edge betweenness over unordered node pairs.
std::vector<double> edge_betweenness(const Graph& g) {
  const int n = g.num_nodes();
  const auto& edges = g.edges();
  std::vector<double> bc(edges.size(), 0.0);
  auto edge_index = [&](int a, int b) {
    const Edge key(a, b);
    return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), key) - edges.begin());
  };
  std::vector<double> sigma(n), delta(n);
  std::vector<int> dist(n);
  std::vector<std::vector<int>> pred(n);
  std::vector<int> order;
  for (int s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    for (auto& p : pred) p.clear();
    order.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (int w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int w = *it;
      for (int v : pred[w]) {
        const double c = sigma[v] / sigma[w] * (1.0 + delta[w]);
        bc[edge_index(v, w)] += c;
        delta[v] += c;
      }
    }
  }
  // Every unordered pair was counted from both endpoints.
  for (double& x : bc) x /= 2.0;
  return bc;
}

}  // namespace

EdgeWeights edge_weights(const Graph& g, FiltrationFunction function, const std::optional<NodeOrdering>& ordering) {
  if (!is_connected(g)) throw GraphError("graph not connected");
  const auto& edges = g.edges();
  EdgeWeights w;
  switch (function) {
    case FiltrationFunction::kDfs: {
      if (!ordering) throw GraphError("DFS filtration requires a node ordering");
      if (ordering->size() != g.num_nodes() || !ordering->is_permutation()) {
        throw GraphError("node ordering is not a permutation of the node set");
      }
      w.values.reserve(edges.size());
      // One-based ranks, so the first possible edge weight is 2.
      for (const Edge& e : edges) w.values.push_back(std::max(ordering->rank[e.u], ordering->rank[e.v]) + 1.0);
      break;
    }
    case FiltrationFunction::kLineFiedler: {
      if (edges.size() == 1) {
        w.values = {0.0};
      } else {
        w.values = fiedler_vector(line_graph(g));
      }
      break;
    }
    case FiltrationFunction::kBetweenness:
    case FiltrationFunction::kRemoteness: {
      w.values = edge_betweenness(g);
      if (function == FiltrationFunction::kRemoteness) {
        for (double& x : w.values) x = -x;
      }
      break;
    }
  }
  return w;
}

std::vector<double> thresholds(const EdgeWeights& weights, const FiltrationConfig& config, int num_nodes) {
  config.validate();
  const int T = config.steps;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> a(T + 1);
  a[0] = -kInf;
  a[T] = kInf;
  if (config.schedule == Schedule::kDfsLinear) {
    for (int t = 1; t < T; ++t) a[t] = 2.0 + (t - 1) * (num_nodes - 2.0) / (T - 1);
    return a;
  }
  std::vector<double> sorted = weights.values;
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  for (int t = 1; t < T; ++t) {
    const double quota = schedule_gamma(config.schedule, static_cast<double>(t) / T) * m;
    auto k = static_cast<std::size_t>(std::clamp(std::ceil(quota - 1e-9), 0.0, m));
    a[t] = k == 0 ? -kInf : sorted[k - 1];
  }
  return a;
}

namespace {

FiltrationSequence assemble(const Graph& g, const FiltrationConfig& config, EdgeWeights weights,
                            NodeOrdering ordering) {
  FiltrationSequence seq;
  seq.n = g.num_nodes();
  seq.config = config;
  seq.thresholds = thresholds(weights, config, g.num_nodes());
  const int T = config.steps;
  seq.edge_sets.resize(T + 1);
  const auto& edges = g.edges();
  for (int t = 0; t <= T; ++t) {
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (weights.values[k] <= seq.thresholds[t]) seq.edge_sets[t].push_back(edges[k]);
    }
  }
  seq.weights = std::move(weights);
  seq.ordering = std::move(ordering);
  return seq;
}

}  // namespace

FiltrationSequence build_filtration(const Graph& g, const FiltrationConfig& config, const NodeOrdering& dfs_order) {
  config.validate();
  if (config.function != FiltrationFunction::kDfs) throw ConfigError("explicit ordering given for a non-DFS filtration");
  EdgeWeights w = edge_weights(g, config.function, dfs_order);
  return assemble(g, config, std::move(w), dfs_order);
}

FiltrationSequence build_filtration(const Graph& g, const FiltrationConfig& config, Rng& rng) {
  config.validate();
  if (!is_connected(g)) throw GraphError("graph not connected");
  if (config.function == FiltrationFunction::kDfs) {
    const int root = std::uniform_int_distribution<int>(0, g.num_nodes() - 1)(rng);
    return build_filtration(g, config, dfs_ordering(g, root, rng));
  }
  EdgeWeights w = edge_weights(g, config.function);
  NodeOrdering ordering = derived_node_ordering(g, w, 0.0, rng);
  return assemble(g, config, std::move(w), std::move(ordering));
}

std::vector<double> affine_lambda_schedule(int steps, double first, double last) {
  std::vector<double> lambdas(steps + 1, 0.0);
  for (int t = 1; t < steps; ++t) {
    lambdas[t] = steps == 2 ? first : first + (t - 1) * (last - first) / (steps - 2);
  }
  return lambdas;
}

NoisySequence noise_augment(const FiltrationSequence& seq, const std::vector<double>& lambdas, Rng& rng) {
  const int T = seq.steps();
  if (static_cast<int>(lambdas.size()) != T + 1) throw ConfigError("lambda schedule length must be T + 1");
  const int n = seq.n;
  const double pairs = n * (n - 1) / 2.0;
  NoisySequence out;
  out.n = n;
  out.lambdas.assign(T + 1, 0.0);
  out.edge_sets.resize(T + 1);
  out.edge_sets[0] = seq.edge_sets[0];
  out.edge_sets[T] = seq.edge_sets[T];
  std::vector<std::uint8_t> present(static_cast<std::size_t>(n) * n);
  for (int t = 1; t < T; ++t) {
    const double lambda = lambdas[t];
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda_t must lie in [0, 1]");
    out.lambdas[t] = lambda;
    const auto& clean = seq.edge_sets[t];
    if (lambda == 0.0 || pairs == 0.0) {
      out.edge_sets[t] = clean;
      continue;
    }
    std::fill(present.begin(), present.end(), 0);
    for (const Edge& e : clean) present[static_cast<std::size_t>(e.u) * n + e.v] = 1;
    const double rho = clean.size() / pairs;
    const double keep = (1.0 - lambda) + lambda * rho;
    const double add = lambda * rho;
    auto& noisy = out.edge_sets[t];
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double p = present[static_cast<std::size_t>(i) * n + j] ? keep : add;
        if (bernoulli(rng, p)) noisy.emplace_back(i, j);
      }
    }
  }
  return out;
}

NodeOrdering derived_node_ordering(const Graph& g, const EdgeWeights& weights, double sigma, Rng& rng) {
  const int n = g.num_nodes();
  if (weights.values.size() != g.num_edges()) throw GraphError("edge weights do not match the edge set");
  std::vector<double> sum(n, 0.0);
  const auto& edges = g.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    sum[edges[k].u] += weights.values[k];
    sum[edges[k].v] += weights.values[k];
  }
  std::vector<double> h(n, 0.0);
  std::normal_distribution<double> jitter(0.0, sigma > 0.0 ? sigma : 1.0);
  for (int i = 0; i < n; ++i) {
    if (g.degree(i) > 0) h[i] = sum[i] / g.degree(i);
    if (sigma > 0.0) h[i] += jitter(rng);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return h[a] > h[b]; });
  return NodeOrdering::from_order(order);
}

}  // namespace anfm
