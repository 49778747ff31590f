// Left-right planarity test (Brandes' formulation of de Fraysseix-Rosenstiehl).
// Only the test is implemented; no embedding is constructed.

#include <algorithm>
#include <vector>

#include "anfm/graph.hpp"

namespace anfm {
namespace {

constexpr int kNone = -1;

struct Interval {
  int low = kNone;
  int high = kNone;
  bool empty() const { return low == kNone && high == kNone; }
};

struct ConflictPair {
  Interval left;
  Interval right;
  long id = 0;
  void swap() { std::swap(left, right); }
};

class LrPlanarity {
 public:
  explicit LrPlanarity(const Graph& g) : g_(g) {
    const int n = g.num_nodes();
    const int m = static_cast<int>(g.num_edges());
    incident_.assign(n, {});
    for (int k = 0; k < m; ++k) {
      const Edge& e = g.edges()[k];
      incident_[e.u].push_back({e.v, k});
      incident_[e.v].push_back({e.u, k});
    }
    height_.assign(n, kNone);
    parent_edge_.assign(n, kNone);
    src_.assign(m, kNone);
    dst_.assign(m, kNone);
    lowpt_.assign(m, 0);
    lowpt2_.assign(m, 0);
    nesting_.assign(m, 0);
    lowpt_edge_.assign(m, kNone);
    ref_.assign(m, kNone);
    stack_bottom_.assign(m, kNone);
    out_.assign(n, {});
  }

  bool run() {
    const int n = g_.num_nodes();
    const auto m = g_.num_edges();
    if (n > 2 && m > 3 * static_cast<std::size_t>(n) - 6) return false;

    std::vector<int> roots;
    for (int v = 0; v < n; ++v) {
      if (height_[v] == kNone) {
        height_[v] = 0;
        roots.push_back(v);
        orient(v);
      }
    }
    for (int v = 0; v < n; ++v) {
      std::stable_sort(out_[v].begin(), out_[v].end(),
                       [&](int a, int b) { return nesting_[a] < nesting_[b]; });
    }
    for (int v : roots) {
      if (!test(v)) return false;
    }
    return true;
  }

 private:
  struct Incidence {
    int node;
    int edge;
  };

  void orient(int v) {
    const int e = parent_edge_[v];
    for (const Incidence& inc : incident_[v]) {
      const int k = inc.edge;
      if (src_[k] != kNone) continue;
      const int w = inc.node;
      src_[k] = v;
      dst_[k] = w;
      out_[v].push_back(k);
      lowpt_[k] = height_[v];
      lowpt2_[k] = height_[v];
      if (height_[w] == kNone) {
        parent_edge_[w] = k;
        height_[w] = height_[v] + 1;
        orient(w);
      } else {
        lowpt_[k] = height_[w];
      }
      nesting_[k] = 2 * lowpt_[k] + (lowpt2_[k] < height_[v] ? 1 : 0);
      if (e != kNone) {
        if (lowpt_[k] < lowpt_[e]) {
          lowpt2_[e] = std::min(lowpt_[e], lowpt2_[k]);
          lowpt_[e] = lowpt_[k];
        } else if (lowpt_[k] > lowpt_[e]) {
          lowpt2_[e] = std::min(lowpt2_[e], lowpt_[k]);
        } else {
          lowpt2_[e] = std::min(lowpt2_[e], lowpt2_[k]);
        }
      }
    }
  }

  void set_ref(int edge, int value) {
    if (edge != kNone) ref_[edge] = value;
  }

  long top_id() const { return stack_.empty() ? kNone : stack_.back().id; }

  void push(ConflictPair p) {
    p.id = next_id_++;
    stack_.push_back(p);
  }

  ConflictPair pop() {
    ConflictPair p = stack_.back();
    stack_.pop_back();
    return p;
  }

  bool conflicting(const Interval& i, int b) const { return !i.empty() && lowpt_[i.high] > lowpt_[b]; }

  int lowest(const ConflictPair& p) const {
    if (p.left.empty()) return lowpt_[p.right.low];
    if (p.right.empty()) return lowpt_[p.left.low];
    return std::min(lowpt_[p.left.low], lowpt_[p.right.low]);
  }

  bool test(int v) {
    const int e = parent_edge_[v];
    const auto& out = out_[v];
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
      const int ei = out[idx];
      const int w = dst_[ei];
      stack_bottom_[ei] = top_id();
      if (ei == parent_edge_[w]) {
        if (!test(w)) return false;
      } else {
        lowpt_edge_[ei] = ei;
        ConflictPair p;
        p.right = Interval{ei, ei};
        push(p);
      }
      if (lowpt_[ei] < height_[v]) {
        if (idx == 0) {
          lowpt_edge_[e] = lowpt_edge_[ei];
        } else if (!add_constraints(ei, e)) {
          return false;
        }
      }
    }
    if (e != kNone) remove_back_edges(e);
    return true;
  }

  bool add_constraints(int ei, int e) {
    ConflictPair p;
    // Merge return edges of ei into p.right.
    while (true) {
      ConflictPair q = pop();
      if (!q.left.empty()) q.swap();
      if (!q.left.empty()) return false;
      if (lowpt_[q.right.low] > lowpt_[e]) {
        if (p.right.empty()) {
          p.right = q.right;
        } else {
          set_ref(p.right.low, q.right.high);
        }
        p.right.low = q.right.low;
      } else {
        set_ref(q.right.low, lowpt_edge_[e]);
      }
      if (top_id() == stack_bottom_[ei]) break;
    }
    // Merge conflicting return edges of earlier siblings into p.left.
    while (!stack_.empty() &&
           (conflicting(stack_.back().left, ei) || conflicting(stack_.back().right, ei))) {
      ConflictPair q = pop();
      if (conflicting(q.right, ei)) q.swap();
      if (conflicting(q.right, ei)) return false;
      set_ref(p.right.low, q.right.high);
      if (q.right.low != kNone) p.right.low = q.right.low;
      if (p.left.empty()) {
        p.left = q.left;
      } else {
        set_ref(p.left.low, q.left.high);
      }
      p.left.low = q.left.low;
    }
    if (!(p.left.empty() && p.right.empty())) push(p);
    return true;
  }

  void remove_back_edges(int e) {
    const int u = src_[e];
    while (!stack_.empty() && lowest(stack_.back()) == height_[u]) pop();
    if (!stack_.empty()) {
      ConflictPair p = pop();
      while (p.left.high != kNone && dst_[p.left.high] == u) p.left.high = ref_[p.left.high];
      if (p.left.high == kNone && p.left.low != kNone) {
        set_ref(p.left.low, p.right.low);
        p.left.low = kNone;
      }
      while (p.right.high != kNone && dst_[p.right.high] == u) p.right.high = ref_[p.right.high];
      if (p.right.high == kNone && p.right.low != kNone) {
        set_ref(p.right.low, p.left.low);
        p.right.low = kNone;
      }
      // Re-push keeps the pair's identity for stack_bottom comparisons.
      stack_.push_back(p);
    }
    if (lowpt_[e] < height_[u] && !stack_.empty()) {
      const int hl = stack_.back().left.high;
      const int hr = stack_.back().right.high;
      if (hl != kNone && (hr == kNone || lowpt_[hl] > lowpt_[hr])) {
        set_ref(e, hl);
      } else {
        set_ref(e, hr);
      }
    }
  }

  const Graph& g_;
  std::vector<std::vector<Incidence>> incident_;
  std::vector<int> height_, parent_edge_;
  std::vector<int> src_, dst_;
  std::vector<int> lowpt_, lowpt2_, nesting_;
  std::vector<int> lowpt_edge_, ref_;
  std::vector<long> stack_bottom_;
  std::vector<std::vector<int>> out_;
  std::vector<ConflictPair> stack_;
  long next_id_ = 0;
};

}  // namespace

bool is_planar(const Graph& g) { return LrPlanarity(g).run(); }

}  // namespace anfm
