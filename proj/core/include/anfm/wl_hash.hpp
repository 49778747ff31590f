#pragma once

#include <cstdint>

#include "anfm/graph.hpp"

namespace anfm {

struct GraphHash {
  std::uint64_t digest = 0;
  int rounds = 0;

  bool operator==(const GraphHash&) const = default;
};

inline constexpr int kDefaultWlRounds = 3;

// Weisfeiler-Lehman color refinement hash. Isomorphic graphs hash equal; the
// converse fails for WL-indistinguishable pairs (e.g. C6 vs two triangles).
GraphHash wl_hash(const Graph& g, int rounds = kDefaultWlRounds);

}  // namespace anfm
