#include "anfm/wl_hash.hpp"

#include <algorithm>
#include <vector>

#include "anfm/errors.hpp"
#include "anfm/rng.hpp"

namespace anfm {
namespace {

std::uint64_t combine(std::uint64_t seed, std::uint64_t value) {
  return mix_seed(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// Order-independent digest of a color multiset.
std::uint64_t histogram_digest(std::vector<std::uint64_t> colors) {
  std::sort(colors.begin(), colors.end());
  std::uint64_t h = mix_seed(colors.size());
  for (std::uint64_t c : colors) h = combine(h, c);
  return h;
}

}  // namespace

GraphHash wl_hash(const Graph& g, int rounds) {
  if (rounds < 1) throw GraphError("wl_hash needs at least one round");
  const int n = g.num_nodes();
  std::vector<std::uint64_t> color(n), next(n);
  for (int v = 0; v < n; ++v) color[v] = mix_seed(static_cast<std::uint64_t>(g.degree(v)));

  std::uint64_t digest = combine(mix_seed(static_cast<std::uint64_t>(n)), g.num_edges());
  digest = combine(digest, histogram_digest(color));
  std::vector<std::uint64_t> nbr;
  for (int r = 0; r < rounds; ++r) {
    for (int v = 0; v < n; ++v) {
      nbr.clear();
      for (int w : g.neighbors(v)) nbr.push_back(color[w]);
      std::sort(nbr.begin(), nbr.end());
      std::uint64_t h = combine(color[v], 0x5bd1e995ULL);
      for (std::uint64_t c : nbr) h = combine(h, c);
      next[v] = h;
    }
    color.swap(next);
    digest = combine(digest, histogram_digest(color));
  }
  return GraphHash{digest, rounds};
}

}  // namespace anfm
