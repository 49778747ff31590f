#include "anfm/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "anfm/errors.hpp"

namespace anfm {
namespace {

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

// > 0 when d lies strictly inside the circumcircle of the counter-clockwise triangle abc.
double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a[0] - d[0], ady = a[1] - d[1];
  const double bdx = b[0] - d[0], bdy = b[1] - d[1];
  const double cdx = c[0] - d[0], cdy = c[1] - d[1];
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

struct Tri {
  int a, b, c;  // counter-clockwise
};

int hull_size(const std::vector<Point2>& pts) {
  std::vector<Point2> p = pts;
  std::sort(p.begin(), p.end());
  if (p.size() < 3) return static_cast<int>(p.size());
  std::vector<Point2> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && orient(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && orient(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  return static_cast<int>(k) - 1;
}

std::vector<Tri> bowyer_watson(const std::vector<Point2>& pts) {
  const int n = static_cast<int>(pts.size());
  double lo_x = pts[0][0], hi_x = lo_x, lo_y = pts[0][1], hi_y = lo_y;
  for (const auto& p : pts) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
  const double cx = (lo_x + hi_x) / 2, cy = (lo_y + hi_y) / 2;
  std::vector<Point2> v = pts;
  v.push_back({cx - 100 * span, cy - 100 * span});
  v.push_back({cx + 100 * span, cy - 100 * span});
  v.push_back({cx, cy + 100 * span});

  std::vector<Tri> tris{{n, n + 1, n + 2}};
  std::vector<std::pair<int, int>> boundary;
  for (int i = 0; i < n; ++i) {
    std::vector<Tri> keep;
    boundary.clear();
    for (const Tri& t : tris) {
      if (incircle(v[t.a], v[t.b], v[t.c], v[i]) > 0) {
        boundary.emplace_back(t.a, t.b);
        boundary.emplace_back(t.b, t.c);
        boundary.emplace_back(t.c, t.a);
      } else {
        keep.push_back(t);
      }
    }
    // Polygon edges appear once; interior edges appear in both directions.
    std::set<std::pair<int, int>> directed(boundary.begin(), boundary.end());
    for (const auto& [a, b] : boundary) {
      if (directed.count({b, a})) continue;
      keep.push_back({a, b, i});
    }
    tris.swap(keep);
  }
  std::vector<Tri> real;
  for (const Tri& t : tris) {
    if (t.a < n && t.b < n && t.c < n) real.push_back(t);
  }
  return real;
}

// O(n^4) fallback: a triangle is Delaunay iff its circumcircle is empty.
std::vector<Tri> brute_force(const std::vector<Point2>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<Tri> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        const double o = orient(pts[i], pts[j], pts[k]);
        if (o == 0.0) continue;
        Tri t = o > 0 ? Tri{i, j, k} : Tri{i, k, j};
        bool empty = true;
        for (int l = 0; l < n && empty; ++l) {
          if (l != i && l != j && l != k && incircle(pts[t.a], pts[t.b], pts[t.c], pts[l]) > 0) empty = false;
        }
        if (empty) out.push_back(t);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Edge> delaunay_edges(const std::vector<Point2>& points) {
  const int n = static_cast<int>(points.size());
  {
    std::vector<Point2> sorted = points;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw GraphError("duplicate points");
  }
  if (n < 2) return {};
  if (n == 2) return {Edge(0, 1)};

  std::vector<Tri> tris = bowyer_watson(points);
  // A finite super triangle can swallow thin hull triangles; the Euler count
  // detects that and the exhaustive construction takes over.
  if (static_cast<int>(tris.size()) != 2 * n - 2 - hull_size(points)) tris = brute_force(points);

  std::set<Edge> edges;
  for (const Tri& t : tris) {
    edges.emplace(t.a, t.b);
    edges.emplace(t.b, t.c);
    edges.emplace(t.c, t.a);
  }
  if (tris.empty()) {
    // Collinear input: the triangulation degenerates to the sorted chain.
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return points[a] < points[b]; });
    for (int i = 0; i + 1 < n; ++i) edges.emplace(idx[i], idx[i + 1]);
  }
  return {edges.begin(), edges.end()};
}

}  // namespace anfm
