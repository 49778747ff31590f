#include "anfm/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "anfm/orbits.hpp"
#include "anfm/parallel.hpp"
#include "anfm/spectral.hpp"
#include "anfm/wl_hash.hpp"

namespace anfm {

std::string to_string(DescriptorKind k) {
  switch (k) {
    case DescriptorKind::kDegree: return "degree";
    case DescriptorKind::kClustering: return "clustering";
    case DescriptorKind::kOrbit: return "orbit";
    case DescriptorKind::kSpectral: return "spectral";
  }
  return "unknown";
}

std::vector<double> local_clustering(const Graph& g) {
  std::vector<double> c(g.num_nodes(), 0.0);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const auto& nb = g.neighbors(v);
    const int d = static_cast<int>(nb.size());
    if (d < 2) continue;
    int links = 0;
    for (int a = 0; a < d; ++a) {
      for (int b = a + 1; b < d; ++b) links += g.has_edge(nb[a], nb[b]);
    }
    c[v] = 2.0 * links / (static_cast<double>(d) * (d - 1));
  }
  return c;
}

namespace {

void bin_into(std::vector<double>& hist, double x, double lo, double hi) {
  const int bins = static_cast<int>(hist.size());
  // Solver roundoff must not decide the side of an edge (eigenvalue 1 is common).
  const double pos = (x - lo) / (hi - lo) * bins;
  const double edge = std::round(pos);
  int b = static_cast<int>(std::floor(std::abs(pos - edge) < 1e-9 ? edge : pos));
  hist[std::clamp(b, 0, bins - 1)] += 1.0;
}

void normalize(std::vector<double>& h) {
  const double s = std::accumulate(h.begin(), h.end(), 0.0);
  if (s > 0.0) {
    for (double& x : h) x /= s;
  }
}

}  // namespace

std::vector<double> descriptor(const Graph& g, DescriptorKind kind) {
  const int n = g.num_nodes();
  switch (kind) {
    case DescriptorKind::kDegree: {
      int max_deg = 0;
      for (int v = 0; v < n; ++v) max_deg = std::max(max_deg, g.degree(v));
      std::vector<double> h(max_deg + 1, 0.0);
      for (int v = 0; v < n; ++v) h[g.degree(v)] += 1.0;
      normalize(h);
      return h;
    }
    case DescriptorKind::kClustering: {
      std::vector<double> h(kClusteringBins, 0.0);
      for (double c : local_clustering(g)) bin_into(h, c, 0.0, 1.0);
      normalize(h);
      return h;
    }
    case DescriptorKind::kOrbit: {
      std::vector<double> mean(kNumOrbits, 0.0);
      if (n == 0) return mean;
      for (const auto& c : orbit_counts(g)) {
        for (int o = 0; o < kNumOrbits; ++o) mean[o] += c[o];
      }
      for (double& x : mean) x /= n;
      return mean;
    }
    case DescriptorKind::kSpectral: {
      std::vector<double> h(kSpectralBins, 0.0);
      if (n == 0) return h;
      for (double lam : eigh(sym_normalized_laplacian(g)).values) bin_into(h, lam, 0.0, 2.0);
      normalize(h);
      return h;
    }
  }
  return {};
}

std::vector<std::vector<double>> descriptors(const std::vector<Graph>& graphs, DescriptorKind kind,
                                             std::size_t threads) {
  std::vector<std::vector<double>> out(graphs.size());
  parallel_for(graphs.size(), threads, [&](std::size_t i) { out[i] = descriptor(graphs[i], kind); });
  return out;
}

double Kernel::operator()(const std::vector<double>& x, const std::vector<double>& y) const {
  const std::size_t len = std::max(x.size(), y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = (i < x.size() ? x[i] : 0.0) - (i < y.size() ? y[i] : 0.0);
    acc += type == Type::kGaussianTv ? std::abs(d) : d * d;
  }
  const double dist2 = type == Type::kGaussianTv ? 0.25 * acc * acc : acc;
  return std::exp(-dist2 / (2.0 * sigma * sigma));
}

std::string Kernel::describe() const {
  std::ostringstream s;
  s << (type == Type::kGaussianTv ? "gaussian_tv" : "gaussian_rbf") << "(sigma=" << sigma << ")";
  return s.str();
}

Kernel default_kernel(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::kDegree: return {Kernel::Type::kGaussianTv, 1.0};
    case DescriptorKind::kClustering: return {Kernel::Type::kGaussianTv, 0.1};
    case DescriptorKind::kOrbit: return {Kernel::Type::kGaussianRbf, 30.0};
    case DescriptorKind::kSpectral: return {Kernel::Type::kGaussianTv, 1.0};
  }
  return {};
}

namespace {

// Mean of k over A x B; per-row partial sums are reduced in row order.
double mean_kernel(const std::vector<std::vector<double>>& A, const std::vector<std::vector<double>>& B,
                   const Kernel& k, std::size_t threads) {
  std::vector<double> rows(A.size(), 0.0);
  parallel_for(A.size(), threads, [&](std::size_t i) {
    double s = 0.0;
    for (const auto& b : B) s += k(A[i], b);
    rows[i] = s;
  });
  double total = 0.0;
  for (double r : rows) total += r;
  return total / (static_cast<double>(A.size()) * static_cast<double>(B.size()));
}

}  // namespace

MmdResult mmd2(const std::vector<std::vector<double>>& X, const std::vector<std::vector<double>>& Y,
               const Kernel& kernel, std::size_t threads) {
  if (X.empty() || Y.empty()) throw std::invalid_argument("mmd2: empty sample set");
  MmdResult r;
  r.n = X.size();
  r.m = Y.size();
  r.kernel = kernel.describe();
  // Evaluate in a canonical orientation so that mmd2(X, Y) and mmd2(Y, X)
  // agree bit for bit.
  const bool swap = X.size() != Y.size() ? X.size() > Y.size() : Y < X;
  const auto& A = swap ? Y : X;
  const auto& B = swap ? X : Y;
  const double kaa = mean_kernel(A, A, kernel, threads), kbb = mean_kernel(B, B, kernel, threads);
  r.value = kaa + kbb - 2.0 * mean_kernel(A, B, kernel, threads);
  return r;
}

double ratio_std(double p, std::size_t n) { return n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0; }

VunResult vun(const std::vector<Graph>& samples, const std::vector<Graph>& train, Family family,
              const SbmParams& sbm) {
  VunResult r;
  r.n = samples.size();
  if (samples.empty()) return r;
  std::unordered_set<std::uint64_t> train_hashes, seen;
  for (const Graph& g : train) train_hashes.insert(wl_hash(g).digest);
  std::size_t nv = 0, nu = 0, nn = 0, nvun = 0;
  for (const Graph& g : samples) {
    const bool is_valid = valid(g, family, sbm);
    const auto h = wl_hash(g).digest;
    const bool is_unique = seen.insert(h).second;
    const bool is_novel = !train_hashes.contains(h);
    nv += is_valid;
    nu += is_unique;
    nn += is_novel;
    nvun += is_valid && is_unique && is_novel;
  }
  const double n = static_cast<double>(samples.size());
  r.valid = nv / n;
  r.unique = nu / n;
  r.novel = nn / n;
  r.vun = nvun / n;
  r.std = ratio_std(r.vun, samples.size());
  return r;
}

double monte_carlo_ratio_std(double p, std::size_t n, int repeats, std::uint64_t seed) {
  Rng rng = derived_rng(seed, 0);
  std::binomial_distribution<std::size_t> draw(n, p);
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const double v = static_cast<double>(draw(rng)) / static_cast<double>(n);
    s += v;
    s2 += v * v;
  }
  const double mean = s / repeats;
  return std::sqrt(std::max(s2 / repeats - mean * mean, 0.0) * repeats / (repeats - 1.0));
}

std::vector<EstimatorRow> estimator_study(const std::vector<Graph>& pool, const std::vector<Graph>& reference,
                                          const std::vector<std::size_t>& sizes, int repeats, std::uint64_t seed,
                                          std::size_t threads) {
  if (reference.empty() || repeats < 1) throw std::invalid_argument("estimator_study: empty reference or repeats");
  for (auto s : sizes) {
    if (s == 0 || s > pool.size()) throw std::invalid_argument("estimator_study: insufficient samples for size " + std::to_string(s));
  }
  std::vector<EstimatorRow> rows;
  const std::size_t P = pool.size(), R = reference.size();
  for (DescriptorKind kind : kAllDescriptors) {
    const Kernel k = default_kernel(kind);
    const auto dp = descriptors(pool, kind, threads), dr = descriptors(reference, kind, threads);
    std::vector<double> kpp(P * P), kpr(P);
    parallel_for(P, threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < P; ++j) kpp[i * P + j] = k(dp[i], dp[j]);
      double s = 0.0;
      for (std::size_t j = 0; j < R; ++j) s += k(dp[i], dr[j]);
      kpr[i] = s / static_cast<double>(R);
    });
    const double krr = mean_kernel(dr, dr, k, threads);
    Rng rng = derived_rng(seed, static_cast<std::uint64_t>(kind));
    std::vector<std::size_t> idx(P);
    for (std::size_t size : sizes) {
      std::vector<double> vals;
      for (int rep = 0; rep < repeats; ++rep) {
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::sort(idx.begin(), idx.begin() + size);
        double sxx = 0.0, sxr = 0.0;
        for (std::size_t a = 0; a < size; ++a) {
          for (std::size_t b = 0; b < size; ++b) sxx += kpp[idx[a] * P + idx[b]];
          sxr += kpr[idx[a]];
        }
        const double s = static_cast<double>(size);
        vals.push_back(sxx / (s * s) + krr - 2.0 * sxr / s);
      }
      EstimatorRow row;
      row.size = size;
      row.kind = kind;
      for (double v : vals) row.mean += v / repeats;
      double var = 0.0;
      for (double v : vals) var += (v - row.mean) * (v - row.mean) / repeats;
      row.std = std::sqrt(var);
      rows.push_back(row);
    }
  }
  return rows;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::vector<BenchRow> bench_sampling(const Model& model, int n, const std::vector<int>& steps, int rollouts,
                                     int repetitions, std::uint64_t seed) {
  if (rollouts < 1 || repetitions < 1) throw std::invalid_argument("bench_sampling: rollouts and repetitions must be >= 1");
  std::vector<BenchRow> rows(steps.size());
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    rngs.push_back(derived_rng(seed, static_cast<std::uint64_t>(steps[i])));
    model.sample(n, rngs[i], SampleMode::kStochastic, steps[i]);  // warm-up
    rows[i].steps = steps[i];
    rows[i].n = n;
  }
  // Repetitions cycle through every T, alternating direction, so slow
  // stretches of host time are shared across the curve instead of bending it.
  for (int r = 0; r < repetitions; ++r) {
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const std::size_t i = r % 2 ? steps.size() - 1 - k : k;
      const auto start = std::chrono::steady_clock::now();
      for (int j = 0; j < rollouts; ++j) model.sample(n, rngs[i], SampleMode::kStochastic, steps[i]);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows[i].samples.push_back(secs / rollouts);
    }
  }
  for (BenchRow& row : rows) {
    row.median = median(row.samples);
    std::vector<double> dev;
    for (double s : row.samples) dev.push_back(std::abs(s - row.median));
    row.mad = median(dev);
  }
  return rows;
}

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("fit_quadratic: need >= 3 points");
  double m[3][4] = {};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double row[3] = {1.0, x[i], x[i] * x[i]};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] += row[a] * row[b];
      m[a][3] += row[a] * y[i];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    std::swap(m[c], m[piv]);
    if (m[c][c] == 0.0) throw std::invalid_argument("fit_quadratic: singular design");
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
}

}  // namespace anfm
