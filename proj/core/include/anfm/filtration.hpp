#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anfm/graph.hpp"
#include "anfm/rng.hpp"

namespace anfm {

enum class FiltrationFunction { kLineFiedler, kDfs, kBetweenness, kRemoteness };
enum class Schedule { kLinear, kConvex, kConcave, kDfsLinear };

std::string to_string(FiltrationFunction f);
std::string to_string(Schedule s);
FiltrationFunction parse_filtration_function(const std::string& s);
Schedule parse_schedule(const std::string& s);

struct FiltrationConfig {
  FiltrationFunction function = FiltrationFunction::kLineFiedler;
  int steps = 30;
  Schedule schedule = Schedule::kLinear;
  std::uint64_t seed = 0;

  // Throws ConfigError for T < 2 or a schedule that does not fit the function.
  void validate() const;
};

// Filtration function values, aligned with g.edges().
struct EdgeWeights {
  std::vector<double> values;
};

struct FiltrationSequence {
  int n = 0;
  std::vector<std::vector<Edge>> edge_sets;  // E_0 ... E_T
  std::vector<double> thresholds;            // a_0 = -inf ... a_T = +inf
  FiltrationConfig config;
  std::string source_id;
  EdgeWeights weights;
  NodeOrdering ordering;  // DFS ordering for DFS filtrations, derived ordering otherwise

  int steps() const { return static_cast<int>(edge_sets.size()) - 1; }
  Graph graph_at(int t) const { return Graph(n, edge_sets[t]); }
};

struct NoisySequence {
  int n = 0;
  std::vector<std::vector<Edge>> edge_sets;  // noisy E~_0 ... E~_T
  std::vector<double> lambdas;               // lambda_t used at each step (0 at the endpoints)

  int steps() const { return static_cast<int>(edge_sets.size()) - 1; }
  Graph graph_at(int t) const { return Graph(n, edge_sets[t]); }
};

// Schedule gamma: [0,1] -> [0,1].
double schedule_gamma(Schedule s, double x);

EdgeWeights edge_weights(const Graph& g, FiltrationFunction function,
                         const std::optional<NodeOrdering>& ordering = std::nullopt);

// a_0..a_T for the given weights. DFS schedules need the node count.
std::vector<double> thresholds(const EdgeWeights& weights, const FiltrationConfig& config, int num_nodes);

// Builds E_t = {e : f(e) <= a_t}. DFS filtrations draw a random root and
// neighbor order from rng; other functions ignore it.
FiltrationSequence build_filtration(const Graph& g, const FiltrationConfig& config, Rng& rng);
FiltrationSequence build_filtration(const Graph& g, const FiltrationConfig& config, const NodeOrdering& dfs_order);

// lambda_t affine from first (t=1) to last (t=T-1), zero at t=0 and t=T.
std::vector<double> affine_lambda_schedule(int steps, double first = 0.25, double last = 0.05);

// Independently keeps/adds each node pair at intermediate steps:
// P = (1 - lambda_t) + lambda_t rho_t for pairs in E_t, lambda_t rho_t otherwise.
// Endpoints t = 0 and t = T are copied unchanged.
NoisySequence noise_augment(const FiltrationSequence& seq, const std::vector<double>& lambdas, Rng& rng);

// Node weights h(i) = mean incident edge weight (+ N(0, sigma^2) jitter); the
// ordering sorts h non-increasing with ties broken by node id.
NodeOrdering derived_node_ordering(const Graph& g, const EdgeWeights& weights, double sigma, Rng& rng);

}  // namespace anfm
