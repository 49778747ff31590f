#include "anfm/community.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "anfm/errors.hpp"

namespace anfm {
namespace {

std::vector<int> relabel_by_smallest_member(const std::vector<int>& labels) {
  std::map<int, int> next;
  std::vector<int> out(labels.size());
  for (std::size_t v = 0; v < labels.size(); ++v) {
    auto it = next.try_emplace(labels[v], static_cast<int>(next.size())).first;
    out[v] = it->second;
  }
  return out;
}

}  // namespace

double modularity(const Graph& g, const std::vector<int>& labels) {
  const double m = static_cast<double>(g.num_edges());
  if (m == 0.0) return 0.0;
  std::map<int, double> inner, degree;
  for (const Edge& e : g.edges()) {
    if (labels[e.u] == labels[e.v]) inner[labels[e.u]] += 1.0;
  }
  for (int v = 0; v < g.num_nodes(); ++v) degree[labels[v]] += g.degree(v);
  double q = 0.0;
  for (const auto& [c, d] : degree) {
    const double frac = d / (2.0 * m);
    q += inner[c] / m - frac * frac;
  }
  return q;
}

std::vector<int> greedy_modularity_communities(const Graph& g, int refine_sweeps) {
  const int n = g.num_nodes();
  std::vector<int> label(n);
  for (int v = 0; v < n; ++v) label[v] = v;
  const double m = static_cast<double>(g.num_edges());
  if (n == 0 || m == 0.0) return relabel_by_smallest_member(label);

  // e[i][j]: fraction of edge endpoints joining communities i and j (i != j).
  std::vector<std::vector<double>> e(n, std::vector<double>(n, 0.0));
  std::vector<double> a(n);
  for (const Edge& ed : g.edges()) {
    e[ed.u][ed.v] += 0.5 / m;
    e[ed.v][ed.u] += 0.5 / m;
  }
  for (int v = 0; v < n; ++v) a[v] = g.degree(v) / (2.0 * m);
  std::vector<char> alive(n, 1);
  std::vector<std::vector<int>> members(n);
  for (int v = 0; v < n; ++v) members[v] = {v};

  while (true) {
    double best = 0.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!alive[j] || e[i][j] == 0.0) continue;
        const double dq = 2.0 * (e[i][j] - a[i] * a[j]);
        if (dq > best + 1e-15) {
          best = dq;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    for (int k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      e[bi][k] += e[bj][k];
      e[k][bi] = e[bi][k];
      e[bj][k] = e[k][bj] = 0.0;
    }
    e[bi][bj] = e[bj][bi] = 0.0;
    a[bi] += a[bj];
    alive[bj] = 0;
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members[bj].clear();
  }
  for (int c = 0; c < n; ++c) {
    for (int v : members[c]) label[v] = c;
  }

  // Single-node moves between adjacent communities.
  std::vector<double> total(n, 0.0);
  for (int v = 0; v < n; ++v) total[label[v]] += g.degree(v);
  std::map<int, double> links;
  for (int sweep = 0; sweep < refine_sweeps; ++sweep) {
    bool moved = false;
    for (int v = 0; v < n; ++v) {
      const int from = label[v];
      const double kv = g.degree(v);
      links.clear();
      for (int w : g.neighbors(v)) links[label[w]] += 1.0;
      const double stay_links = links.count(from) ? links[from] : 0.0;
      const double stay_total = total[from] - kv;
      double best_gain = 1e-12;
      int best = from;
      for (const auto& [c, k_in] : links) {
        if (c == from) continue;
        const double gain = (k_in - stay_links) / m - kv * (total[c] - stay_total) / (2.0 * m * m);
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      if (best != from) {
        total[from] -= kv;
        total[best] += kv;
        label[v] = best;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return relabel_by_smallest_member(label);
}

double planted_partition_resolution(double p_in, double p_out) {
  if (!(p_out > 0.0 && p_in > p_out && p_in < 1.0)) throw ConfigError("planted partition needs 0 < p_out < p_in < 1");
  return std::log((1.0 - p_out) / (1.0 - p_in)) / std::log(p_in * (1.0 - p_out) / (p_out * (1.0 - p_in)));
}

namespace {

// Weighted multigraph of supernodes; self weights hold internal edges.
struct Level {
  std::vector<double> size;
  std::vector<std::map<int, double>> links;
};

// Moves supernodes greedily until no move improves the quality. Returns
// whether anything moved.
bool local_moves(const Level& level, std::vector<int>& comm, double resolution, int max_sweeps, bool open) {
  const int n = static_cast<int>(level.size.size());
  std::vector<double> total(n, 0.0);
  for (int v = 0; v < n; ++v) total[comm[v]] += level.size[v];
  bool any = false;
  std::map<int, double> to;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool moved = false;
    for (int v = 0; v < n; ++v) {
      const int from = comm[v];
      const double s = level.size[v];
      to.clear();
      for (const auto& [w, x] : level.links[v]) {
        if (w != v) to[comm[w]] += x;
      }
      const double stay = (to.count(from) ? to[from] : 0.0) - resolution * s * (total[from] - s);
      double best_gain = 1e-12;
      int best = from;
      for (const auto& [c, x] : to) {
        if (c == from) continue;
        const double gain = x - resolution * s * total[c] - stay;
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      // Leaving for an empty community.
      if (open && -stay > best_gain) {
        for (int c = 0; c < n; ++c) {
          if (total[c] == 0.0) {
            best = c;
            break;
          }
        }
      }
      if (best != from) {
        total[from] -= s;
        total[best] += s;
        comm[v] = best;
        moved = any = true;
      }
    }
    if (!moved) break;
  }
  return any;
}

}  // namespace

std::vector<int> louvain_communities(const Graph& g, const std::vector<double>& weights, double resolution,
                                     int refine_sweeps) {
  const int n = g.num_nodes();
  std::vector<int> label(n);
  for (int v = 0; v < n; ++v) label[v] = v;
  if (n == 0) return label;

  Level base;
  base.size = weights;
  base.links.resize(n);
  for (const Edge& e : g.edges()) {
    base.links[e.u][e.v] += 1.0;
    base.links[e.v][e.u] += 1.0;
  }
  Level level = base;
  while (true) {
    const int m = static_cast<int>(level.size.size());
    std::vector<int> comm(m);
    for (int v = 0; v < m; ++v) comm[v] = v;
    if (!local_moves(level, comm, resolution, refine_sweeps, true)) break;
    comm = relabel_by_smallest_member(comm);
    int k = 0;
    for (int c : comm) k = std::max(k, c + 1);
    for (int& c : label) c = comm[c];
    Level next;
    next.size.assign(k, 0.0);
    next.links.resize(k);
    for (int v = 0; v < m; ++v) {
      next.size[comm[v]] += level.size[v];
      for (const auto& [w, x] : level.links[v]) next.links[comm[v]][comm[w]] += x;
    }
    level = std::move(next);
  }
  local_moves(base, label, resolution, refine_sweeps, true);
  return relabel_by_smallest_member(label);
}

std::vector<int> potts_refine(const Graph& g, std::vector<int> labels, double resolution, int refine_sweeps) {
  const int n = g.num_nodes();
  Level base;
  base.size.assign(n, 1.0);
  base.links.resize(n);
  for (const Edge& e : g.edges()) {
    base.links[e.u][e.v] += 1.0;
    base.links[e.v][e.u] += 1.0;
  }
  labels = relabel_by_smallest_member(labels);
  local_moves(base, labels, resolution, refine_sweeps, false);
  return relabel_by_smallest_member(labels);
}

namespace {

struct BlockFit {
  int k = 0;
  double intra_pairs = 0.0, inter_pairs = 0.0, intra_edges = 0.0, inter_edges = 0.0;
};

BlockFit block_fit(const Graph& g, const std::vector<int>& labels) {
  std::map<int, double> size;
  for (int c : labels) size[c] += 1.0;
  BlockFit f;
  f.k = static_cast<int>(size.size());
  const double n = g.num_nodes();
  for (const auto& [c, s] : size) f.intra_pairs += s * (s - 1) / 2.0;
  f.inter_pairs = n * (n - 1) / 2.0 - f.intra_pairs;
  for (const Edge& e : g.edges()) (labels[e.u] == labels[e.v] ? f.intra_edges : f.inter_edges) += 1.0;
  return f;
}

double bernoulli_mle_loglik(double hits, double trials) {
  if (trials == 0.0) return 0.0;
  const double p = hits / trials;
  double ll = 0.0;
  if (hits > 0.0) ll += hits * std::log(p);
  if (trials - hits > 0.0) ll += (trials - hits) * std::log1p(-p);
  return ll;
}

}  // namespace

std::vector<int> sbm_partition(const Graph& g, int refine_sweeps) {
  const int n = g.num_nodes();
  const double m = static_cast<double>(g.num_edges());
  if (n == 0 || m == 0.0) {
    std::vector<int> label(n);
    for (int v = 0; v < n; ++v) label[v] = v;
    return label;
  }
  std::vector<double> degree(n);
  for (int v = 0; v < n; ++v) degree[v] = g.degree(v);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> best_labels;
  for (double res : {0.5, 0.7, 0.85, 1.0, 1.2, 1.5, 2.0, 2.5}) {
    std::vector<int> labels = louvain_communities(g, degree, res / (2.0 * m), refine_sweeps);
    for (int round = 0; round < 3; ++round) {
      BlockFit f = block_fit(g, labels);
      if (f.intra_pairs == 0.0 || f.inter_pairs == 0.0) break;
      const double p_in = f.intra_edges / f.intra_pairs, p_out = f.inter_edges / f.inter_pairs;
      if (!(p_out > 0.0 && p_in > p_out && p_in < 1.0)) break;
      labels = potts_refine(g, labels, planted_partition_resolution(p_in, p_out), refine_sweeps);
    }
    BlockFit f = block_fit(g, labels);
    const double score = bernoulli_mle_loglik(f.intra_edges, f.intra_pairs) +
                         bernoulli_mle_loglik(f.inter_edges, f.inter_pairs) - n * std::log(f.k);
    if (score > best) {
      best = score;
      best_labels = std::move(labels);
    }
  }
  return best_labels;
}

}  // namespace anfm
