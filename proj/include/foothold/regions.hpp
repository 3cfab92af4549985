#pragma once

#include "foothold/common.hpp"
#include "foothold/criteria.hpp"
#include "foothold/terrain.hpp"

#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace foothold {

/// Simple polygon, counter-clockwise, world xy.
struct Polygon {
  std::vector<Vec2> vertices;

  std::size_t size() const { return vertices.size(); }
};

struct Halfspace {
  Vec2 normal{1.0, 0.0};  // unit, outward
  double offset = 0.0;    // normal . p <= offset
};

struct ConvexRegion {
  Polygon polygon;
  std::vector<Halfspace> halfspaces;
  double area = 0.0;
  double terrain_z_ref = 0.0;

  bool contains(const Vec2& p, double tol = 1e-9) const {
    for (const auto& h : halfspaces)
      if (h.normal.dot(p) > h.offset + tol) return false;
    return true;
  }
};

// Thrown by select_region on an empty candidate list.
class EmptyRegionList : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

namespace geometry {

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }
inline double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

inline double signed_area(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) s += cross(v[i], v[(i + 1) % n]);
  return 0.5 * s;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

inline bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double eps) {
  return std::abs(orient(a, b, p)) <= eps && p.x() >= std::min(a.x(), b.x()) - eps &&
         p.x() <= std::max(a.x(), b.x()) + eps && p.y() >= std::min(a.y(), b.y()) - eps &&
         p.y() <= std::max(a.y(), b.y()) + eps;
}

// Closed-segment intersection test, touching counts.
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps = 1e-12) {
  const double d1 = orient(c, d, a), d2 = orient(c, d, b), d3 = orient(a, b, c), d4 = orient(a, b, d);
  if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)))
    return true;
  return on_segment(a, c, d, eps) || on_segment(b, c, d, eps) || on_segment(c, a, b, eps) || on_segment(d, a, b, eps);
}

inline bool is_simple(const std::vector<Vec2>& v) {
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 &a = v[i], &b = v[(i + 1) % n];
    if ((b - a).norm() < 1e-15) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2 &c = v[j], &d = v[(j + 1) % n];
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) {
        // Adjacent edges share one endpoint; they must not fold back onto each other.
        const Vec2& shared = (j == i + 1) ? b : a;
        const Vec2& other_i = (j == i + 1) ? a : b;
        const Vec2& other_j = (j == i + 1) ? d : c;
        if (std::abs(orient(other_i, shared, other_j)) <= 1e-15 && (other_i - shared).dot(other_j - shared) > 0.0)
          return false;
        continue;
      }
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

inline std::vector<Vec2> remove_collinear(std::vector<Vec2> v, double eps = 1e-12) {
  bool changed = true;
  while (changed && v.size() > 3) {
    changed = false;
    for (std::size_t i = 0; i < v.size() && v.size() > 3; ++i) {
      const std::size_t n = v.size();
      const Vec2& prev = v[(i + n - 1) % n];
      const Vec2& next = v[(i + 1) % n];
      const double scale = std::max({(v[i] - prev).norm(), (next - v[i]).norm(), 1e-12});
      if (std::abs(orient(prev, v[i], next)) <= eps * scale && (v[i] - prev).dot(next - v[i]) >= 0.0) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  return v;
}

inline bool is_convex(const std::vector<Vec2>& v, double tol = 1e-9) {
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (orient(v[i], v[(i + 1) % n], v[(i + 2) % n]) < -tol) return false;
  return true;
}

// Sutherland-Hodgman clip of a convex polygon against n.p <= b.
inline std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& n, double b) {
  std::vector<Vec2> out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % m];
    const double fp = n.dot(p) - b, fq = n.dot(q) - b;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) out.push_back(p + (fp / (fp - fq)) * (q - p));
  }
  return out;
}

}  // namespace geometry

/// Builds the halfspace form of a convex CCW polygon. Collinear vertices are dropped.
inline ConvexRegion make_region(const Polygon& poly, double terrain_z_ref = 0.0) {
  ConvexRegion r;
  r.polygon.vertices = geometry::remove_collinear(poly.vertices);
  const auto& v = r.polygon.vertices;
  if (v.size() < 3) throw InvalidArgument("convex region needs at least three vertices");
  r.area = geometry::signed_area(v);
  if (!(r.area > 0.0)) throw InvalidArgument("convex region must be counter-clockwise with positive area");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 e = v[(i + 1) % v.size()] - v[i];
    Halfspace h;
    h.normal = Vec2(e.y(), -e.x()).normalized();
    h.offset = h.normal.dot(v[i]);
    r.halfspaces.push_back(h);
  }
  r.terrain_z_ref = terrain_z_ref;
  return r;
}

/// Euclidean distance from p to the region, zero inside.
inline double region_distance(const ConvexRegion& region, const Vec2& p) {
  if (region.contains(p, 0.0)) return 0.0;
  const auto& v = region.polygon.vertices;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i)
    d = std::min(d, geometry::point_segment_distance(p, v[i], v[(i + 1) % v.size()]));
  return d;
}

/// Closest point of the region to p (p itself when inside).
inline Vec2 project_onto_region(const ConvexRegion& region, const Vec2& p) {
  if (region.contains(p, 0.0)) return p;
  const auto& v = region.polygon.vertices;
  Vec2 best = v.front();
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 &a = v[i], &b = v[(i + 1) % v.size()];
    const Vec2 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Vec2 q = a + t * ab;
    if ((q - p).norm() < d) {
      d = (q - p).norm();
      best = q;
    }
  }
  return best;
}

struct Component {
  std::vector<std::pair<int, int>> cells;  // (row, col)
  double area = 0.0;
  Vec2 center_xy{0.0, 0.0};
  double resolution = 0.02;
};

/// 4-connected components of the safe cells, in row-major discovery order.
inline std::vector<Component> connected_components(const SafetyMask& mask) {
  std::vector<Component> out;
  std::array<int, kWindowCells> label;
  label.fill(-1);
  for (int start = 0; start < kWindowCells; ++start) {
    if (!mask.safe[start] || label[start] >= 0) continue;
    Component comp;
    comp.center_xy = mask.center_xy;
    comp.resolution = mask.resolution;
    std::deque<int> queue{start};
    label[start] = static_cast<int>(out.size());
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      const int i = c / kWindowSize, j = c % kWindowSize;
      comp.cells.emplace_back(i, j);
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= kWindowSize || n[1] >= kWindowSize) continue;
        const int k = n[0] * kWindowSize + n[1];
        if (mask.safe[k] && label[k] < 0) {
          label[k] = static_cast<int>(out.size());
          queue.push_back(k);
        }
      }
    }
    comp.area = static_cast<double>(comp.cells.size()) * mask.resolution * mask.resolution;
    out.push_back(std::move(comp));
  }
  return out;
}

namespace detail {

// Cell corner (x, y) in integer corner coordinates; corner (j, i) is the lower-left corner of cell (i, j).
using Corner = std::pair<int, int>;

inline Vec2 corner_world(const Component& comp, const Corner& c) {
  const double half = kWindowSize / 2 + 0.5;
  return comp.center_xy + Vec2((c.first - half) * comp.resolution, (c.second - half) * comp.resolution);
}

// Splits a closed corner sequence that revisits a corner into simple sub-cycles.
inline std::vector<std::vector<Corner>> split_repeats(const std::vector<Corner>& cycle) {
  std::vector<std::vector<Corner>> out;
  std::vector<Corner> stack;
  std::map<Corner, std::size_t> pos;
  for (const Corner& c : cycle) {
    auto it = pos.find(c);
    if (it != pos.end()) {
      std::vector<Corner> sub(stack.begin() + static_cast<std::ptrdiff_t>(it->second), stack.end());
      for (std::size_t k = it->second + 1; k < stack.size(); ++k) pos.erase(stack[k]);
      stack.resize(it->second + 1);
      if (sub.size() >= 3) out.push_back(std::move(sub));
    } else {
      pos[c] = stack.size();
      stack.push_back(c);
    }
  }
  if (stack.size() >= 3) out.push_back(std::move(stack));
  return out;
}

}  // namespace detail

/// All boundary loops of a component as polygons (outer boundaries CCW with
/// positive area, holes CW), vertices at cell corners, collinear corners dropped.
inline std::vector<Polygon> trace_loops(const Component& comp) {
  using detail::Corner;
  std::array<bool, kWindowCells> in{};
  for (auto [i, j] : comp.cells) in[i * kWindowSize + j] = true;
  auto occupied = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < kWindowSize && j < kWindowSize && in[i * kWindowSize + j];
  };

  struct Edge {
    Corner from, to;
  };
  std::vector<Edge> edges;
  std::map<Corner, std::vector<std::size_t>> outgoing;
  auto add = [&](Corner a, Corner b) {
    outgoing[a].push_back(edges.size());
    edges.push_back({a, b});
  };
  for (auto [i, j] : comp.cells) {
    if (!occupied(i - 1, j)) add({j, i}, {j + 1, i});
    if (!occupied(i, j + 1)) add({j + 1, i}, {j + 1, i + 1});
    if (!occupied(i + 1, j)) add({j + 1, i + 1}, {j, i + 1});
    if (!occupied(i, j - 1)) add({j, i + 1}, {j, i});
  }

  // Successor of each edge: the left-most turn at its end corner.
  auto dir = [&](const Edge& e) { return Corner{e.to.first - e.from.first, e.to.second - e.from.second}; };
  std::vector<std::size_t> next(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [dx, dy] = dir(edges[e]);
    const Corner prefs[3] = {{-dy, dx}, {dx, dy}, {dy, -dx}};
    const auto& cands = outgoing.at(edges[e].to);
    std::size_t chosen = cands.front();
    bool found = false;
    for (const auto& pd : prefs) {
      for (std::size_t c : cands)
        if (dir(edges[c]) == pd) {
          chosen = c;
          found = true;
          break;
        }
      if (found) break;
    }
    next[e] = chosen;
  }

  std::vector<Polygon> loops;
  std::vector<bool> used(edges.size(), false);
  for (std::size_t e0 = 0; e0 < edges.size(); ++e0) {
    if (used[e0]) continue;
    std::vector<Corner> cycle;
    for (std::size_t e = e0; !used[e]; e = next[e]) {
      used[e] = true;
      cycle.push_back(edges[e].from);
    }
    for (const auto& sub : detail::split_repeats(cycle)) {
      Polygon p;
      for (const Corner& c : sub) p.vertices.push_back(detail::corner_world(comp, c));
      p.vertices = geometry::remove_collinear(p.vertices);
      loops.push_back(std::move(p));
    }
  }
  return loops;
}

/// Outer boundary of a component; holes are ignored. When diagonal pinches
/// split the boundary, the loop with the largest area is returned.
inline Polygon trace_contour(const Component& comp) {
  if (comp.cells.empty()) throw InvalidArgument("trace_contour requires a non-empty component");
  Polygon best;
  double best_area = 0.0;
  for (auto& loop : trace_loops(comp)) {
    const double a = geometry::signed_area(loop.vertices);
    if (a > best_area) {
      best_area = a;
      best = std::move(loop);
    }
  }
  return best;
}

namespace detail {

inline void douglas_peucker(const std::vector<Vec2>& v, std::size_t first, std::size_t last, double tol,
                            std::vector<bool>& keep) {
  const std::size_t n = v.size();
  const std::size_t span = (last + n - first) % n;
  if (span < 2) return;
  double dmax = -1.0;
  std::size_t imax = first;
  for (std::size_t k = 1; k < span; ++k) {
    const std::size_t idx = (first + k) % n;
    const double d = geometry::point_segment_distance(v[idx], v[first], v[last]);
    if (d > dmax) {
      dmax = d;
      imax = idx;
    }
  }
  if (dmax > tol) {
    keep[imax] = true;
    douglas_peucker(v, first, imax, tol, keep);
    douglas_peucker(v, imax, last, tol, keep);
  }
}

inline std::vector<Vec2> dp_closed(const std::vector<Vec2>& v, double tol) {
  const std::size_t n = v.size();
  // Anchor at the lowest-leftmost vertex (always a strict corner) and its farthest partner.
  std::size_t a = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (v[i].y() < v[a].y() || (v[i].y() == v[a].y() && v[i].x() < v[a].x())) a = i;
  std::size_t b = a;
  double far = -1.0;
  for (std::size_t i = 0; i < n; ++i)
    if ((v[i] - v[a]).norm() > far) {
      far = (v[i] - v[a]).norm();
      b = i;
    }
  std::vector<bool> keep(n, false);
  keep[a] = keep[b] = true;
  douglas_peucker(v, a, b, tol, keep);
  douglas_peucker(v, b, a, tol, keep);
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(v[i]);
  return out;
}

}  // namespace detail

/// Douglas-Peucker on the closed contour. If the result would self-intersect
/// the tolerance is halved until it does not.
inline Polygon simplify(const Polygon& poly, double tol) {
  if (!(tol >= 0.0)) throw InvalidArgument("simplify tolerance must be non-negative");
  if (tol == 0.0 || poly.size() <= 3) return poly;
  for (double t = tol; t > 1e-12; t *= 0.5) {
    std::vector<Vec2> out = detail::dp_closed(poly.vertices, t);
    if (out.size() < 3) throw InvalidArgument("simplification degenerated below three vertices");
    if (geometry::is_simple(out) && geometry::signed_area(out) > 0.0) return Polygon{std::move(out)};
  }
  return poly;
}

namespace detail {

inline bool point_in_triangle_closed(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
  return geometry::orient(a, b, p) >= -eps && geometry::orient(b, c, p) >= -eps && geometry::orient(c, a, p) >= -eps;
}

// Ear clipping; returns triangles as index triples into v.
inline std::vector<std::vector<std::size_t>> triangulate(const std::vector<Vec2>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
  std::vector<std::vector<std::size_t>> tris;
  const double eps = 1e-14;
  std::size_t i = 0;
  std::size_t stall = 0;
  while (idx.size() > 3) {
    const std::size_t n = idx.size();
    const std::size_t ip = (i + n - 1) % n, in = (i + 1) % n;
    const Vec2 &a = v[idx[ip]], &b = v[idx[i]], &c = v[idx[in]];
    bool ear = geometry::orient(a, b, c) > eps;
    for (std::size_t k = 0; k < n && ear; ++k) {
      if (k == ip || k == i || k == in) continue;
      const Vec2& p = v[idx[k]];
      if (p == a || p == c) continue;
      if (point_in_triangle_closed(p, a, b, c, eps)) ear = false;
    }
    if (ear) {
      tris.push_back({idx[ip], idx[i], idx[in]});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
      i = ip < i ? ip : ip - 1;
      stall = 0;
    } else {
      i = (i + 1) % n;
      if (++stall > n) throw InvalidArgument("ear clipping failed; polygon is not simple");
    }
  }
  tris.push_back({idx[0], idx[1], idx[2]});
  return tris;
}

}  // namespace detail

/// Ear-clipping triangulation followed by Hertel-Mehlhorn removal of
/// inessential diagonals.
inline std::vector<ConvexRegion> convex_decompose(const Polygon& polygon) {
  std::vector<Vec2> v = geometry::remove_collinear(polygon.vertices);
  if (v.size() < 3 || !geometry::is_simple(v)) throw InvalidArgument("convex_decompose requires a simple polygon");
  if (!(geometry::signed_area(v) > 0.0)) throw InvalidArgument("convex_decompose requires counter-clockwise order");
  if (geometry::is_convex(v, 0.0)) return {make_region(Polygon{v})};

  auto pieces = detail::triangulate(v);
  auto position = [](const std::vector<std::size_t>& p, std::size_t x) {
    return static_cast<std::size_t>(std::find(p.begin(), p.end(), x) - p.begin());
  };
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t pi = 0; pi < pieces.size() && !merged; ++pi) {
      const auto& P = pieces[pi];
      for (std::size_t e = 0; e < P.size() && !merged; ++e) {
        const std::size_t a = P[e], b = P[(e + 1) % P.size()];
        for (std::size_t qi = 0; qi < pieces.size() && !merged; ++qi) {
          if (qi == pi) continue;
          const auto& Q = pieces[qi];
          const std::size_t qb = position(Q, b);
          if (qb == Q.size() || Q[(qb + 1) % Q.size()] != a) continue;
          // Merged cycle: P from b around to a, then Q strictly between a and b.
          std::vector<std::size_t> m;
          for (std::size_t k = 0; k < P.size(); ++k) m.push_back(P[(e + 1 + k) % P.size()]);
          const std::size_t qa = (qb + 1) % Q.size();
          for (std::size_t k = 1; k + 1 < Q.size(); ++k) m.push_back(Q[(qa + k) % Q.size()]);
          const std::size_t ma = P.size() - 1, mb = 0;
          auto convex_at = [&](std::size_t k) {
            const std::size_t n = m.size();
            return geometry::orient(v[m[(k + n - 1) % n]], v[m[k]], v[m[(k + 1) % n]]) >= -1e-12;
          };
          if (!convex_at(ma) || !convex_at(mb)) continue;
          pieces[pi] = std::move(m);
          pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(qi));
          merged = true;
        }
      }
    }
  }

  std::vector<ConvexRegion> out;
  for (const auto& p : pieces) {
    Polygon poly;
    for (std::size_t k : p) poly.vertices.push_back(v[k]);
    out.push_back(make_region(poly));
  }
  return out;
}

/// Moves every halfspace inward by `margin`. Returns nullopt when nothing is left.
inline std::optional<ConvexRegion> inset(const ConvexRegion& region, double margin) {
  if (!(margin >= 0.0)) throw InvalidArgument("inset margin must be non-negative");
  if (margin == 0.0) return region;
  std::vector<Vec2> poly = region.polygon.vertices;
  for (const auto& h : region.halfspaces) {
    poly = geometry::clip_halfplane(poly, h.normal, h.offset - margin);
    if (poly.size() < 3) return std::nullopt;
  }
  poly = geometry::remove_collinear(poly, 1e-9);
  if (poly.size() < 3 || geometry::signed_area(poly) < 1e-12) return std::nullopt;
  return make_region(Polygon{poly}, region.terrain_z_ref);
}

struct Selection {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Nearest region by boundary distance (zero inside); ties go to the larger
/// area, then the lower index.
inline Selection select_region(const std::vector<ConvexRegion>& regions, const Vec2& nominal_xy) {
  if (regions.empty()) throw EmptyRegionList("select_region called with no candidate regions");
  Selection best{0, region_distance(regions[0], nominal_xy)};
  for (std::size_t k = 1; k < regions.size(); ++k) {
    const double d = region_distance(regions[k], nominal_xy);
    const bool closer = d < best.distance - 1e-12;
    const bool tie = std::abs(d - best.distance) <= 1e-12;
    if (closer || (tie && regions[k].area > regions[best.index].area + 1e-15)) best = {k, d};
  }
  return best;
}

struct RegionSettings {
  double simplify_factor = 1.5;  // tolerance in units of mask resolution
};

struct RegionResult {
  std::vector<ConvexRegion> candidates;
  std::optional<std::size_t> selected;  // empty: no region survived
  double distance = 0.0;

  bool has_region() const { return selected.has_value(); }
  const ConvexRegion& region() const { return candidates.at(*selected); }
};

namespace detail {

// Safe mask cells whose center lies inside the region.
inline std::vector<int> unsafe_cells_inside(const SafetyMask& mask, const ConvexRegion& region) {
  std::vector<int> bad;
  const double half = kWindowSize / 2;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& p : region.polygon.vertices) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const auto j0 = std::max(0, static_cast<int>(std::floor((xmin - mask.center_xy.x()) / mask.resolution + half)));
  const auto j1 = std::min(kWindowSize - 1, static_cast<int>(std::ceil((xmax - mask.center_xy.x()) / mask.resolution + half)));
  const auto i0 = std::max(0, static_cast<int>(std::floor((ymin - mask.center_xy.y()) / mask.resolution + half)));
  const auto i1 = std::min(kWindowSize - 1, static_cast<int>(std::ceil((ymax - mask.center_xy.y()) / mask.resolution + half)));
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j)
      if (!mask.at(i, j) && region.contains(mask.cell_center(i, j))) bad.push_back(i * kWindowSize + j);
  return bad;
}

inline std::optional<ConvexRegion> intersect(const ConvexRegion& a, const ConvexRegion& b) {
  std::vector<Vec2> poly = a.polygon.vertices;
  for (const auto& h : b.halfspaces) {
    poly = geometry::clip_halfplane(poly, h.normal, h.offset);
    if (poly.size() < 3) return std::nullopt;
  }
  poly = geometry::remove_collinear(poly, 1e-9);
  if (poly.size() < 3 || geometry::signed_area(poly) < 1e-12) return std::nullopt;
  return make_region(Polygon{poly}, a.terrain_z_ref);
}

// Cuts unsafe cell centers out with axis-aligned lines through the cell edges,
// keeping the larger remainder each time.
inline std::optional<ConvexRegion> carve_unsafe(const SafetyMask& mask, ConvexRegion region) {
  for (;;) {
    const auto bad = unsafe_cells_inside(mask, region);
    if (bad.empty()) return region;
    const Vec2 u = mask.cell_center(bad.front() / kWindowSize, bad.front() % kWindowSize);
    const double h = 0.5 * mask.resolution;
    const std::pair<Vec2, double> cuts[4] = {{Vec2(1, 0), u.x() - h},
                                             {Vec2(-1, 0), -(u.x() + h)},
                                             {Vec2(0, 1), u.y() - h},
                                             {Vec2(0, -1), -(u.y() + h)}};
    std::optional<ConvexRegion> best;
    for (const auto& [n, b] : cuts) {
      ConvexRegion half;
      half.halfspaces = {Halfspace{n, b}};
      auto piece = intersect(region, half);
      if (piece && (!best || piece->area > best->area)) best = std::move(piece);
    }
    if (!best) return std::nullopt;
    region = std::move(*best);
  }
}

inline double mean_height_inside(const ConvexRegion& region, const HeightmapWindow& window) {
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j)
      if (region.contains(window.cell_center(i, j))) {
        sum += window.at(i, j);
        ++n;
      }
  if (n > 0) return sum / n;
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : region.polygon.vertices) centroid += p;
  centroid /= static_cast<double>(region.polygon.size());
  return window.lookup_clamped(centroid.x(), centroid.y());
}

}  // namespace detail

/// Mask to a single convex foothold region: components, contour, simplify,
/// convex pieces, inset by the foot radius, cell-wise soundness repair,
/// nearest-region selection. `window`, when given, supplies terrain_z_ref.
inline RegionResult decompose_and_select(const SafetyMask& mask, const Vec2& nominal_xy, const RobotGeometry& geom,
                                         const HeightmapWindow* window = nullptr, const RegionSettings& settings = {}) {
  RegionResult result;
  const double tol = settings.simplify_factor * mask.resolution;

  auto accept = [&](const ConvexRegion& piece) {
    if (!detail::unsafe_cells_inside(mask, piece).empty()) return false;
    result.candidates.push_back(piece);
    return true;
  };

  for (const auto& comp : connected_components(mask)) {
    for (const auto& loop : trace_loops(comp)) {
      if (!(geometry::signed_area(loop.vertices) > 0.0)) continue;  // hole
      Polygon simplified = loop;
      try {
        simplified = simplify(loop, tol);
      } catch (const InvalidArgument&) {
        simplified = loop;
      }
      std::optional<std::vector<ConvexRegion>> exact_pieces;
      for (const auto& piece : convex_decompose(simplified)) {
        auto shrunk = inset(piece, geom.foot_radius);
        if (!shrunk) continue;
        if (accept(*shrunk)) continue;
        // Simplification bulged outside the safe set: clip against the exact contour.
        if (!exact_pieces) {
          exact_pieces.emplace();
          for (const auto& ep : convex_decompose(loop))
            if (auto s = inset(ep, geom.foot_radius)) exact_pieces->push_back(*s);
        }
        for (const auto& ep : *exact_pieces) {
          auto clipped = detail::intersect(*shrunk, ep);
          if (!clipped) continue;
          if (accept(*clipped)) continue;
          if (auto carved = detail::carve_unsafe(mask, *clipped)) accept(*carved);
        }
      }
    }
  }
  if (window)
    for (auto& c : result.candidates) c.terrain_z_ref = detail::mean_height_inside(c, *window);
  if (result.candidates.empty()) return result;
  const Selection s = select_region(result.candidates, nominal_xy);
  result.selected = s.index;
  result.distance = s.distance;
  return result;
}

/// Centre of the safe cell closest to `nominal_xy`; nullopt for an all-unsafe mask.
inline std::optional<Vec2> nearest_safe_cell(const SafetyMask& mask, const Vec2& nominal_xy) {
  std::optional<Vec2> best;
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kWindowSize; ++i)
    for (int j = 0; j < kWindowSize; ++j) {
      if (!mask.at(i, j)) continue;
      const Vec2 c = mask.cell_center(i, j);
      const double dc = (c - nominal_xy).norm();
      if (dc < d - 1e-12) {
        d = dc;
        best = c;
      }
    }
  return best;
}

}  // namespace foothold
