#pragma once

#include <vector>

#include "anfm/graph.hpp"

namespace anfm {

// Newman modularity of a node partition (labels need not be contiguous).
double modularity(const Graph& g, const std::vector<int>& labels);

// Clauset-Newman-Moore agglomeration followed by up to refine_sweeps passes of
// single-node moves that increase modularity. Labels are contiguous from 0,
// numbered by smallest member.
std::vector<int> greedy_modularity_communities(const Graph& g, int refine_sweeps = 100);

// Louvain local moving and aggregation maximizing
//   sum_c [internal edges - resolution * sum_{i<j in c} w_i w_j].
// Unit weights give the constant Potts model; degree weights with resolution
// 1/(2m) give modularity.
std::vector<int> louvain_communities(const Graph& g, const std::vector<double>& weights, double resolution,
                                     int refine_sweeps = 100);

// Potts resolution whose optimum is the maximum-likelihood planted partition
// for known within/between edge probabilities.
double planted_partition_resolution(double p_in, double p_out);

// Single-node Potts moves between existing communities.
std::vector<int> potts_refine(const Graph& g, std::vector<int> labels, double resolution, int refine_sweeps = 100);

// Planted-partition SBM fit: Louvain modularity candidates over a resolution
// grid, each refined at the resolution of its own fitted densities, scored by
// description length -log L(p_in, p_out) + n log k.
std::vector<int> sbm_partition(const Graph& g, int refine_sweeps = 100);

}  // namespace anfm
