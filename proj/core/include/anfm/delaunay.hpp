#pragma once

#include <array>
#include <vector>

#include "anfm/graph.hpp"

namespace anfm {

using Point2 = std::array<double, 2>;

// Edges of the Delaunay triangulation (Bowyer-Watson). Points are expected in
// general position; exact duplicates throw GraphError.
std::vector<Edge> delaunay_edges(const std::vector<Point2>& points);

}  // namespace anfm
