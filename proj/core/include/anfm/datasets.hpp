#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "anfm/graph.hpp"
#include "anfm/rng.hpp"

namespace anfm {

enum class Family { kPlanar, kSbm, kLobster };

std::string to_string(Family f);
Family parse_family(const std::string& s);

struct PlanarParams {
  int num_points = 64;
};

struct SbmParams {
  int min_communities = 2;
  int max_communities = 5;
  int min_size = 20;
  int max_size = 40;
  double p_intra = 0.3;
  double p_inter = 0.05;
};

// Backbone length is int(2 U backbone_mean + 0.5); every backbone node grows
// Geometric(p1) leaves, each of which grows Geometric(p2) leaves.
struct LobsterParams {
  double backbone_mean = 80.0;
  double p1 = 0.7;
  double p2 = 0.7;
  int min_nodes = 10;
  int max_nodes = 100;
};

struct DatasetSpec {
  Family family = Family::kPlanar;
  int train = 8192;
  int val = 256;
  int test = 256;
  std::uint64_t seed = 0;
  PlanarParams planar;
  SbmParams sbm;
  LobsterParams lobster;
  int max_rejections = 10000;

  void validate() const;
};

struct GraphRecord {
  Graph graph;
  Family family = Family::kPlanar;
  std::map<std::string, double> params;
};

struct Dataset {
  std::vector<GraphRecord> train, val, test;
};

// One connected sample. Throws DataError(kMalformed) after spec.max_rejections
// rejected draws.
GraphRecord sample_record(const DatasetSpec& spec, Rng& rng);

// Graph i of the concatenated train/val/test list uses derived_rng(seed, i),
// so the output does not depend on the thread count.
Dataset generate(const DatasetSpec& spec, std::size_t threads = 0);

struct SbmFit {
  std::vector<int> labels;
  int communities = 0;
  std::uint64_t intra_edges = 0, intra_pairs = 0;
  std::uint64_t inter_edges = 0, inter_pairs = 0;
  bool sizes_ok = false;
  bool intra_ok = false;
  bool inter_ok = false;
};

SbmFit fit_sbm(const Graph& g, const SbmParams& params = {});

// [lo, hi] with P(X < lo) <= alpha/2 and P(X > hi) <= alpha/2 for X ~ Binomial(trials, p).
std::pair<std::uint64_t, std::uint64_t> binomial_interval(std::uint64_t trials, double p, double alpha);

bool valid(const Graph& g, Family family, const SbmParams& sbm = {});

// GDS1 container.
std::string encode_gds(const std::vector<Graph>& graphs);
std::vector<Graph> decode_gds(std::string_view bytes);
void save_gds(const std::string& path, const std::vector<Graph>& graphs);
std::vector<Graph> load_gds(const std::string& path);

// One {"n": .., "edges": [[u, v], ...]} object per line.
std::string encode_jsonl(const std::vector<Graph>& graphs);
void save_jsonl(const std::string& path, const std::vector<Graph>& graphs);

std::vector<Graph> graphs_of(const std::vector<GraphRecord>& records);

}  // namespace anfm
