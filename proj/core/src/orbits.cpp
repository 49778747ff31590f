#include "anfm/orbits.hpp"

#include <algorithm>
#include <stdexcept>

namespace anfm {

void classify_graphlet(const Graph& g, const std::vector<int>& nodes, std::vector<int>& orbits) {
  const int k = static_cast<int>(nodes.size());
  int deg[4] = {0, 0, 0, 0};
  int edges = 0;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      if (g.has_edge(nodes[a], nodes[b])) {
        ++deg[a];
        ++deg[b];
        ++edges;
      }
    }
  }
  const int max_deg = *std::max_element(deg, deg + k);
  orbits.assign(k, -1);
  for (int a = 0; a < k; ++a) {
    const int d = deg[a];
    int o = -1;
    if (k == 2) {
      o = 0;
    } else if (k == 3) {
      o = edges == 3 ? 3 : (d == 1 ? 1 : 2);
    } else if (k == 4) {
      switch (edges) {
        case 3: o = max_deg == 3 ? (d == 3 ? 7 : 6) : (d == 1 ? 4 : 5); break;
        case 4: o = max_deg == 2 ? 8 : (d == 1 ? 9 : d == 2 ? 10 : 11); break;
        case 5: o = d == 2 ? 12 : 13; break;
        case 6: o = 14; break;
        default: break;
      }
    }
    if (o < 0) throw std::invalid_argument("classify_graphlet: subgraph is not a connected graphlet");
    orbits[a] = o;
  }
}

namespace {

// ESU enumeration of connected induced subgraphs with up to four nodes.
class Esu {
 public:
  Esu(const Graph& g, std::vector<OrbitCounts>& out) : g_(g), out_(out) {}

  void run() {
    for (int v = 0; v < g_.num_nodes(); ++v) {
      sub_ = {v};
      std::vector<int> ext;
      for (int u : g_.neighbors(v)) {
        if (u > v) ext.push_back(u);
      }
      extend(ext, v);
    }
  }

 private:
  bool in_neighborhood(int w) const {
    for (int s : sub_) {
      if (s == w || g_.has_edge(s, w)) return true;
    }
    return false;
  }

  void extend(std::vector<int> ext, int root) {
    if (sub_.size() >= 2) {
      classify_graphlet(g_, sub_, orbits_);
      for (std::size_t a = 0; a < sub_.size(); ++a) out_[sub_[a]][orbits_[a]] += 1.0;
    }
    if (sub_.size() == 4) return;
    while (!ext.empty()) {
      const int w = ext.back();
      ext.pop_back();
      std::vector<int> next = ext;
      for (int u : g_.neighbors(w)) {
        if (u <= root || in_neighborhood(u)) continue;
        if (std::find(next.begin(), next.end(), u) == next.end()) next.push_back(u);
      }
      sub_.push_back(w);
      extend(std::move(next), root);
      sub_.pop_back();
    }
  }

  const Graph& g_;
  std::vector<OrbitCounts>& out_;
  std::vector<int> sub_;
  std::vector<int> orbits_;
};

}  // namespace

std::vector<OrbitCounts> orbit_counts(const Graph& g) {
  std::vector<OrbitCounts> out(g.num_nodes());
  for (auto& c : out) c.fill(0.0);
  Esu(g, out).run();
  return out;
}

}  // namespace anfm
