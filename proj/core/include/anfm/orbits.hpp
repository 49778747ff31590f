#pragma once

#include <array>
#include <vector>

#include "anfm/graph.hpp"

namespace anfm {

inline constexpr int kNumOrbits = 15;

using OrbitCounts = std::array<double, kNumOrbits>;

// Per-node counts of the 15 automorphism orbits of connected graphlets on 2-4
// nodes (induced occurrences), numbered as in ORCA: 0 edge; 1-2 path P3
// (end, middle); 3 triangle; 4-5 path P4 (end, inner); 6-7 star (leaf,
// center); 8 cycle C4; 9-11 paw (tail, triangle degree 2, degree 3); 12-13
// diamond (degree 2, degree 3); 14 K4.
std::vector<OrbitCounts> orbit_counts(const Graph& g);

// Orbit of each member of a connected induced subgraph on 2-4 nodes.
// nodes[k] receives orbits[k].
void classify_graphlet(const Graph& g, const std::vector<int>& nodes, std::vector<int>& orbits);

}  // namespace anfm
