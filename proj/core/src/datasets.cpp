#include "anfm/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "anfm/community.hpp"
#include "anfm/delaunay.hpp"
#include "anfm/errors.hpp"
#include "anfm/parallel.hpp"
#include "binary_io.hpp"


namespace anfm {

std::string to_string(Family f) {
  switch (f) {
    case Family::kPlanar: return "planar";
    case Family::kSbm: return "sbm";
    case Family::kLobster: return "lobster";
  }
  return "unknown";
}

Family parse_family(const std::string& s) {
  if (s == "planar") return Family::kPlanar;
  if (s == "sbm") return Family::kSbm;
  if (s == "lobster") return Family::kLobster;
  throw ConfigError("unknown dataset family '" + s + "'");
}

void DatasetSpec::validate() const {
  if (train < 1 || val < 1 || test < 1) throw ConfigError("dataset split counts must be >= 1");
  if (max_rejections < 1) throw ConfigError("dataset.max_rejections must be >= 1");
  if (planar.num_points < 3) throw ConfigError("dataset.planar.num_points must be >= 3");
  if (sbm.min_communities < 1 || sbm.max_communities < sbm.min_communities) {
    throw ConfigError("dataset.sbm community range is empty");
  }
  if (sbm.min_size < 1 || sbm.max_size < sbm.min_size) throw ConfigError("dataset.sbm size range is empty");
  if (sbm.p_intra < 0 || sbm.p_intra > 1 || sbm.p_inter < 0 || sbm.p_inter > 1) {
    throw ConfigError("dataset.sbm probabilities must lie in [0, 1]");
  }
  if (lobster.p1 < 0 || lobster.p1 >= 1 || lobster.p2 < 0 || lobster.p2 >= 1) {
    throw ConfigError("dataset.lobster p1/p2 must lie in [0, 1)");
  }
  if (lobster.backbone_mean <= 0) throw ConfigError("dataset.lobster.backbone_mean must be positive");
  if (lobster.min_nodes < 1 || lobster.max_nodes < lobster.min_nodes) {
    throw ConfigError("dataset.lobster node window is empty");
  }
  if (lobster.max_nodes > 65535 || sbm.max_communities * sbm.max_size > 65535 || planar.num_points > 65535) {
    throw ConfigError("graphs larger than 65535 nodes do not fit the container format");
  }
}

namespace {

std::optional<GraphRecord> draw_planar(const PlanarParams& p, Rng& rng) {
  std::vector<Point2> pts(p.num_points);
  for (auto& pt : pts) pt = {uniform01(rng), uniform01(rng)};
  Graph g(p.num_points, delaunay_edges(pts));
  if (!is_connected(g)) return std::nullopt;
  return GraphRecord{std::move(g), Family::kPlanar, {{"num_points", p.num_points}}};
}

std::optional<GraphRecord> draw_sbm(const SbmParams& p, Rng& rng) {
  const int k = std::uniform_int_distribution<int>(p.min_communities, p.max_communities)(rng);
  std::vector<int> block;
  std::map<std::string, double> params{{"communities", k}};
  for (int c = 0; c < k; ++c) {
    const int size = std::uniform_int_distribution<int>(p.min_size, p.max_size)(rng);
    params["size_" + std::to_string(c)] = size;
    block.insert(block.end(), size, c);
  }
  const int n = static_cast<int>(block.size());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (bernoulli(rng, block[i] == block[j] ? p.p_intra : p.p_inter)) edges.emplace_back(i, j);
    }
  }
  Graph g(n, std::move(edges));
  if (!is_connected(g)) return std::nullopt;
  return GraphRecord{std::move(g), Family::kSbm, std::move(params)};
}

std::optional<GraphRecord> draw_lobster(const LobsterParams& p, Rng& rng) {
  const int backbone = static_cast<int>(2.0 * uniform01(rng) * p.backbone_mean + 0.5);
  if (backbone < 1) return std::nullopt;
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < backbone; ++i) edges.emplace_back(i, i + 1);
  int next = backbone;
  for (int i = 0; i < backbone; ++i) {
    while (uniform01(rng) < p.p1) {
      const int cat = next++;
      edges.emplace_back(i, cat);
      while (uniform01(rng) < p.p2) edges.emplace_back(cat, next++);
      if (next > p.max_nodes) return std::nullopt;
    }
  }
  if (next < p.min_nodes || next > p.max_nodes) return std::nullopt;
  return GraphRecord{Graph(next, std::move(edges)), Family::kLobster, {{"backbone", backbone}}};
}

}  // namespace

GraphRecord sample_record(const DatasetSpec& spec, Rng& rng) {
  for (int attempt = 0; attempt < spec.max_rejections; ++attempt) {
    std::optional<GraphRecord> r;
    switch (spec.family) {
      case Family::kPlanar: r = draw_planar(spec.planar, rng); break;
      case Family::kSbm: r = draw_sbm(spec.sbm, rng); break;
      case Family::kLobster: r = draw_lobster(spec.lobster, rng); break;
    }
    if (r) return std::move(*r);
  }
  throw DataError(DataError::Kind::kMalformed,
                  "no acceptable " + to_string(spec.family) + " graph after " + std::to_string(spec.max_rejections) +
                      " draws");
}

Dataset generate(const DatasetSpec& spec, std::size_t threads) {
  spec.validate();
  const std::size_t total = static_cast<std::size_t>(spec.train) + spec.val + spec.test;
  std::vector<GraphRecord> all(total);
  parallel_for(total, threads, [&](std::size_t i) {
    Rng rng = derived_rng(spec.seed, i);
    all[i] = sample_record(spec, rng);
  });
  Dataset d;
  auto first = std::make_move_iterator(all.begin());
  d.train.assign(first, first + spec.train);
  d.val.assign(first + spec.train, first + spec.train + spec.val);
  d.test.assign(first + spec.train + spec.val, std::make_move_iterator(all.end()));
  return d;
}

std::pair<std::uint64_t, std::uint64_t> binomial_interval(std::uint64_t trials, double p, double alpha) {
  if (trials == 0) return {0, 0};
  if (p <= 0.0) return {0, 0};
  if (p >= 1.0) return {trials, trials};
  const double nn = static_cast<double>(trials);
  auto log_pmf = [&](std::uint64_t k) {
    const double kk = static_cast<double>(k);
    return std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) + kk * std::log(p) +
           (nn - kk) * std::log1p(-p);
  };
  std::uint64_t lo = 0;
  double cdf = 0.0;
  while (lo < trials) {
    const double next = cdf + std::exp(log_pmf(lo));
    if (next > alpha / 2) break;
    cdf = next;
    ++lo;
  }
  std::uint64_t hi = trials;
  double tail = 0.0;
  while (hi > 0) {
    const double next = tail + std::exp(log_pmf(hi));
    if (next > alpha / 2) break;
    tail = next;
    --hi;
  }
  return {lo, hi};
}

SbmFit fit_sbm(const Graph& g, const SbmParams& params) {
  SbmFit fit;
  fit.labels = sbm_partition(g, 100);
  const int n = g.num_nodes();
  for (int v = 0; v < n; ++v) fit.communities = std::max(fit.communities, fit.labels[v] + 1);
  std::vector<std::uint64_t> size(fit.communities, 0);
  for (int v = 0; v < n; ++v) ++size[fit.labels[v]];
  fit.sizes_ok = fit.communities >= params.min_communities && fit.communities <= params.max_communities;
  for (std::uint64_t s : size) {
    if (s < static_cast<std::uint64_t>(params.min_size) || s > static_cast<std::uint64_t>(params.max_size)) {
      fit.sizes_ok = false;
    }
  }
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  for (std::uint64_t s : size) fit.intra_pairs += s * (s - 1) / 2;
  fit.inter_pairs = all_pairs - fit.intra_pairs;
  for (const Edge& e : g.edges()) {
    if (fit.labels[e.u] == fit.labels[e.v]) {
      ++fit.intra_edges;
    } else {
      ++fit.inter_edges;
    }
  }
  const auto [ilo, ihi] = binomial_interval(fit.intra_pairs, params.p_intra, 0.01);
  const auto [olo, ohi] = binomial_interval(fit.inter_pairs, params.p_inter, 0.01);
  fit.intra_ok = fit.intra_edges >= ilo && fit.intra_edges <= ihi;
  fit.inter_ok = fit.inter_edges >= olo && fit.inter_edges <= ohi;
  return fit;
}

bool valid(const Graph& g, Family family, const SbmParams& sbm) {
  switch (family) {
    case Family::kPlanar: return is_connected(g) && is_planar(g);
    case Family::kLobster: return is_lobster(g);
    case Family::kSbm: {
      if (g.num_nodes() == 0) return false;
      const SbmFit fit = fit_sbm(g, sbm);
      return fit.sizes_ok && fit.intra_ok && fit.inter_ok;
    }
  }
  return false;
}

namespace {

constexpr char kGdsMagic[4] = {'G', 'D', 'S', '1'};
constexpr std::uint32_t kGdsVersion = 1;

using detail::put;
using detail::read_file;
using detail::Reader;
using detail::write_file;

}  // namespace

std::string encode_gds(const std::vector<Graph>& graphs) {
  std::string out(kGdsMagic, 4);
  put<std::uint32_t>(out, kGdsVersion);
  put<std::uint64_t>(out, graphs.size());
  for (const Graph& g : graphs) {
    if (g.num_nodes() > 65535) throw DataError(DataError::Kind::kIncompatible, "GDS1: graph exceeds 65535 nodes");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.num_nodes()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.num_edges()));
    for (const Edge& e : g.edges()) {
      put<std::uint16_t>(out, static_cast<std::uint16_t>(e.u));
      put<std::uint16_t>(out, static_cast<std::uint16_t>(e.v));
    }
  }
  return out;
}

std::vector<Graph> decode_gds(std::string_view bytes) {
  using K = DataError::Kind;
  if (bytes.size() < 16) throw DataError(K::kHeader, "GDS1: header too short");
  if (bytes.substr(0, 4) != std::string_view(kGdsMagic, 4)) throw DataError(K::kBadMagic, "GDS1: bad magic");
  Reader r(bytes.substr(4), "GDS1");
  const auto version = r.get<std::uint32_t>(K::kHeader, "version");
  if (version != kGdsVersion) throw DataError(K::kVersion, "GDS1: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint64_t>(K::kHeader, "graph count");
  // Every graph needs at least 8 bytes, which bounds a corrupt count before allocating.
  if (count > r.remaining() / 8 + 1) throw DataError(K::kTruncated, "GDS1: graph count exceeds payload");
  std::vector<Graph> graphs;
  graphs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto n = r.get<std::uint32_t>(K::kTruncated, "graph header");
    const auto m = r.get<std::uint32_t>(K::kTruncated, "graph header");
    if (static_cast<std::uint64_t>(m) * 4 > r.remaining()) throw DataError(K::kTruncated, "GDS1: truncated edge list");
    std::vector<Edge> edges;
    edges.reserve(m);
    for (std::uint32_t k = 0; k < m; ++k) {
      const int u = r.get<std::uint16_t>(K::kTruncated, "edge");
      const int v = r.get<std::uint16_t>(K::kTruncated, "edge");
      if (u >= v || static_cast<std::uint32_t>(v) >= n) throw DataError(K::kMalformed, "GDS1: invalid edge");
      if (!edges.empty() && !(edges.back() < Edge(u, v))) throw DataError(K::kMalformed, "GDS1: edges not sorted");
      edges.emplace_back(u, v);
    }
    graphs.emplace_back(static_cast<int>(n), std::move(edges));
  }
  if (r.remaining() != 0) throw DataError(K::kMalformed, "GDS1: trailing bytes");
  return graphs;
}

void save_gds(const std::string& path, const std::vector<Graph>& graphs) { write_file(path, encode_gds(graphs)); }

std::vector<Graph> load_gds(const std::string& path) { return decode_gds(read_file(path)); }

std::string encode_jsonl(const std::vector<Graph>& graphs) {
  std::string out;
  for (const Graph& g : graphs) {
    out += "{\"n\":" + std::to_string(g.num_nodes()) + ",\"edges\":[";
    bool first = true;
    for (const Edge& e : g.edges()) {
      if (!first) out += ',';
      first = false;
      out += '[' + std::to_string(e.u) + ',' + std::to_string(e.v) + ']';
    }
    out += "]}\n";
  }
  return out;
}

void save_jsonl(const std::string& path, const std::vector<Graph>& graphs) { write_file(path, encode_jsonl(graphs)); }

std::vector<Graph> graphs_of(const std::vector<GraphRecord>& records) {
  std::vector<Graph> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.graph);
  return out;
}

}  // namespace anfm
