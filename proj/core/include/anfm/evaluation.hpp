#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anfm/datasets.hpp"
#include "anfm/graph.hpp"
#include "anfm/model.hpp"

namespace anfm {

enum class DescriptorKind { kDegree, kClustering, kOrbit, kSpectral };

inline constexpr DescriptorKind kAllDescriptors[] = {DescriptorKind::kDegree, DescriptorKind::kClustering,
                                                     DescriptorKind::kOrbit, DescriptorKind::kSpectral};

std::string to_string(DescriptorKind k);

inline constexpr int kClusteringBins = 100;
inline constexpr int kSpectralBins = 200;

// Degree: normalized histogram over 0..max degree (shorter vectors are
// zero-padded when compared). Clustering: 100 bins on [0, 1]. Spectral:
// normalized-Laplacian eigenvalues in 200 bins on [0, 2]. Orbit: mean per-node
// orbit counts.
std::vector<double> descriptor(const Graph& g, DescriptorKind kind);
std::vector<std::vector<double>> descriptors(const std::vector<Graph>& graphs, DescriptorKind kind,
                                             std::size_t threads = 1);

std::vector<double> local_clustering(const Graph& g);

// Gaussian over total variation for histograms, Gaussian RBF for orbits.
struct Kernel {
  enum class Type { kGaussianTv, kGaussianRbf } type = Type::kGaussianTv;
  double sigma = 1.0;

  double operator()(const std::vector<double>& x, const std::vector<double>& y) const;
  std::string describe() const;
};

Kernel default_kernel(DescriptorKind kind);

struct MmdResult {
  double value = 0.0;
  std::string kernel;
  std::size_t n = 0, m = 0;
};

// Biased V-statistic: mean k(x, x') + mean k(y, y') - 2 mean k(x, y).
MmdResult mmd2(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y,
               const Kernel& kernel, std::size_t threads = 1);

struct VunResult {
  double valid = 0.0, unique = 0.0, novel = 0.0, vun = 0.0;
  double std = 0.0;  // sqrt(V (1 - V) / n) for the VUN ratio
  std::size_t n = 0;
};

// Unique: the first sample of each WL hash class. Novel: hash absent from train.
VunResult vun(const std::vector<Graph>& samples, const std::vector<Graph>& train, Family family,
              const SbmParams& sbm = {});

double ratio_std(double p, std::size_t n);

// Standard deviation over `repeats` simulated validity ratios of n Bernoulli(p) draws.
double monte_carlo_ratio_std(double p, std::size_t n, int repeats, std::uint64_t seed);

struct EstimatorRow {
  std::size_t size = 0;
  DescriptorKind kind = DescriptorKind::kDegree;
  double mean = 0.0, std = 0.0;
};

// For each size, `repeats` subsamples of the pool without replacement compared
// against the reference set.
std::vector<EstimatorRow> estimator_study(const std::vector<Graph>& pool, const std::vector<Graph>& reference,
                                          const std::vector<std::size_t>& sizes, int repeats, std::uint64_t seed,
                                          std::size_t threads = 1);

struct BenchRow {
  int steps = 0;
  int n = 0;
  double median = 0.0;  // seconds per graph
  double mad = 0.0;
  std::vector<double> samples;
};

// Per-graph sampling time, after one warm-up rollout, as median and MAD over
// `repetitions` timings of `rollouts` graphs each.
std::vector<BenchRow> bench_sampling(const Model& model, int n, const std::vector<int>& steps, int rollouts,
                                     int repetitions, std::uint64_t seed);

// Least squares y = a + b x + c x^2.
struct QuadraticFit {
  double a = 0.0, b = 0.0, c = 0.0;
  double operator()(double x) const { return a + b * x + c * x * x; }
};

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace anfm
