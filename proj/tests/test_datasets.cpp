#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "anfm/community.hpp"
#include "anfm/datasets.hpp"
#include "anfm/errors.hpp"
#include "support.hpp"

using namespace anfm;
using namespace anfm::testing;

namespace {

DatasetSpec small(Family f, std::uint64_t seed = 3) {
  DatasetSpec s;
  s.family = f;
  s.train = 12;
  s.val = 2;
  s.test = 4;
  s.seed = seed;
  s.planar.num_points = 24;
  s.lobster.backbone_mean = 5;
  s.lobster.max_nodes = 30;
  return s;
}

double binom_cdf(std::uint64_t k, std::uint64_t n, double p) {
  double sum = 0.0;
  for (std::uint64_t i = 0; i <= k; ++i) {
    sum += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * std::log(p) +
                    (n - i) * std::log1p(-p));
  }
  return sum;
}

}  // namespace

TEST(Datasets, DeterministicAndThreadIndependent) {
  for (Family f : {Family::kPlanar, Family::kSbm, Family::kLobster}) {
    auto a = generate(small(f), 1), b = generate(small(f), 3);
    EXPECT_EQ(encode_gds(graphs_of(a.train)), encode_gds(graphs_of(b.train)));
    EXPECT_EQ(encode_gds(graphs_of(a.test)), encode_gds(graphs_of(b.test)));
    auto c = generate(small(f, 4), 1);
    EXPECT_NE(encode_gds(graphs_of(a.train)), encode_gds(graphs_of(c.train)));
  }
}

TEST(Datasets, GeneratedGraphsAreConnectedAndValid) {
  for (Family f : {Family::kPlanar, Family::kLobster}) {
    DatasetSpec spec = small(f);
    auto ds = generate(spec, 1);
    ASSERT_EQ(ds.train.size(), 12u);
    for (const auto& r : ds.train) {
      EXPECT_TRUE(is_connected(r.graph));
      EXPECT_TRUE(valid(r.graph, f));
      if (f == Family::kPlanar) EXPECT_EQ(r.graph.num_nodes(), 24);
      if (f == Family::kLobster) {
        EXPECT_GE(r.graph.num_nodes(), spec.lobster.min_nodes);
        EXPECT_LE(r.graph.num_nodes(), spec.lobster.max_nodes);
      }
    }
  }
}

TEST(Datasets, SbmSamplesAreMostlyValidUnderTheSurrogate) {
  DatasetSpec spec = small(Family::kSbm);
  spec.train = 60;
  auto ds = generate(spec, 1);
  int ok = 0;
  for (const auto& r : ds.train) {
    EXPECT_TRUE(is_connected(r.graph));
    ok += valid(r.graph, Family::kSbm, spec.sbm);
  }
  EXPECT_GE(ok, 54);
}

TEST(Datasets, RejectsBadSpecs) {
  DatasetSpec s = small(Family::kSbm);
  s.sbm.p_intra = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small(Family::kLobster);
  s.lobster.min_nodes = 40;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_family("protein"), ConfigError);
}

TEST(Datasets, RejectionBudgetIsEnforced) {
  DatasetSpec s = small(Family::kLobster);
  s.lobster.backbone_mean = 200;
  s.max_rejections = 5;
  Rng rng(1);
  EXPECT_THROW(sample_record(s, rng), DataError);
}

TEST(Gds, RoundTripAndLayout) {
  Rng rng(2);
  std::vector<Graph> gs{random_connected(9, 0.3, rng), Graph(1), random_connected(30, 0.1, rng)};
  std::string bytes = encode_gds(gs);
  EXPECT_EQ(bytes.substr(0, 4), "GDS1");
  std::size_t expect = 4 + 4 + 8;
  for (const auto& g : gs) expect += 8 + 4 * g.num_edges();
  EXPECT_EQ(bytes.size(), expect);
  auto back = decode_gds(bytes);
  ASSERT_EQ(back.size(), gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) EXPECT_EQ(back[i], gs[i]);
}

TEST(Gds, CorruptInputsRaiseDistinctErrors) {
  Rng rng(3);
  std::string bytes = encode_gds({random_connected(10, 0.3, rng), random_connected(12, 0.3, rng)});
  auto kind = [](std::string_view b) {
    try {
      decode_gds(b);
    } catch (const DataError& e) {
      return e.kind();
    }
    return DataError::Kind::kIo;
  };
  EXPECT_EQ(kind(bytes.substr(0, 10)), DataError::Kind::kHeader);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind(bad), DataError::Kind::kBadMagic);
  bad = bytes;
  bad[4] = 9;
  EXPECT_EQ(kind(bad), DataError::Kind::kVersion);
  EXPECT_EQ(kind(bytes.substr(0, bytes.size() - 3)), DataError::Kind::kTruncated);
  EXPECT_EQ(kind(bytes + "x"), DataError::Kind::kMalformed);
}

TEST(Gds, JsonLinesMirror) {
  Graph g(3, {{0, 1}, {1, 2}});
  std::istringstream in(encode_jsonl({g, Graph(2)}));
  std::string line;
  std::getline(in, line);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["n"], 3);
  EXPECT_EQ(j["edges"], nlohmann::json::parse("[[0,1],[1,2]]"));
  std::getline(in, line);
  EXPECT_EQ(nlohmann::json::parse(line)["edges"].size(), 0u);
}

TEST(BinomialInterval, TailsMatchDirectSummation) {
  for (auto [n, p] : {std::pair<std::uint64_t, double>{50, 0.3}, {400, 0.05}, {1000, 0.5}}) {
    auto [lo, hi] = binomial_interval(n, p, 0.01);
    EXPECT_LE(lo == 0 ? 0.0 : binom_cdf(lo - 1, n, p), 0.005 + 1e-12);
    EXPECT_LE(1.0 - binom_cdf(hi, n, p), 0.005 + 1e-9);
    // Tight: widening by one on either side would already violate a tail.
    if (lo > 0) EXPECT_GT(binom_cdf(lo, n, p), 0.005);
    EXPECT_GT(1.0 - binom_cdf(hi - 1, n, p), 0.005);
  }
}

TEST(Community, ModularityOfTwoTriangles) {
  Graph g(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}});
  EXPECT_NEAR(modularity(g, {0, 0, 0, 1, 1, 1}), 6.0 / 7.0 - 0.5, 1e-12);
  EXPECT_NEAR(modularity(g, {0, 0, 0, 0, 0, 0}), 0.0, 1e-12);
  EXPECT_EQ(greedy_modularity_communities(g), (std::vector<int>{0, 0, 0, 1, 1, 1}));
}

TEST(Community, PlantedPartitionResolution) {
  // Potts optimum equals the likelihood optimum: adding one intra pair with an
  // edge gains log(p/q), without an edge loses log((1-q)/(1-p)).
  double p = 0.3, q = 0.05, r = planted_partition_resolution(p, q);
  double gain_edge = std::log(p / q), loss_gap = std::log((1 - q) / (1 - p));
  EXPECT_NEAR(r, loss_gap / (gain_edge + loss_gap), 1e-15);
  EXPECT_THROW(planted_partition_resolution(0.05, 0.3), ConfigError);
}

TEST(Community, LouvainPottsMergesCliques) {
  // Three 6-cliques joined in a ring by single edges.
  std::vector<Edge> e;
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) e.emplace_back(6 * b + i, 6 * b + j);
    e.emplace_back(6 * b, (6 * b + 6) % 18 + 1);
  }
  Graph g(18, e);
  auto labels = louvain_communities(g, std::vector<double>(18, 1.0), 0.5);
  for (int v = 0; v < 18; ++v) EXPECT_EQ(labels[v], v / 6);
  EXPECT_EQ(sbm_partition(g), labels);
}

TEST(Community, FitSbmRecoversPlantedBlocks) {
  Rng rng(5);
  // Two dense blocks of 25 with a few bridges.
  std::vector<Edge> e;
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 25; ++i)
      for (int j = i + 1; j < 25; ++j)
        if (bernoulli(rng, 0.3)) e.emplace_back(25 * b + i, 25 * b + j);
  for (int i = 0; i < 25; ++i)
    for (int j = 25; j < 50; ++j)
      if (bernoulli(rng, 0.05)) e.emplace_back(i, j);
  Graph g(50, e);
  SbmFit fit = fit_sbm(g);
  EXPECT_EQ(fit.communities, 2);
  for (int i = 1; i < 25; ++i) EXPECT_EQ(fit.labels[i], fit.labels[0]);
  for (int i = 26; i < 50; ++i) EXPECT_EQ(fit.labels[i], fit.labels[25]);
  EXPECT_TRUE(valid(g, Family::kSbm));
  EXPECT_FALSE(valid(complete_graph(30), Family::kSbm));
}
