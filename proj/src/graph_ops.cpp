#include "ntg/graph_ops.hpp"

#include <algorithm>
#include <set>

namespace ntg {

std::optional<NodeId> snap(const RoadGraph &g, Vec2 p, double eps) {
  return g.nearest_within(p, eps);
}

namespace {

void rdp_mark(const std::vector<Vec2> &pts, std::size_t lo, std::size_t hi, double tol,
              std::vector<bool> &keep) {
  if (hi <= lo + 1) return;
  double best = -1.0;
  std::size_t best_i = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
    if (d > best) {
      best = d;
      best_i = i;
    }
  }
  if (best > tol) {
    keep[best_i] = true;
    rdp_mark(pts, lo, best_i, tol, keep);
    rdp_mark(pts, best_i, hi, tol, keep);
  }
}

std::size_t farthest_from_segment(const std::vector<Vec2> &pts, Vec2 a, Vec2 b,
                                  const std::vector<bool> &exclude) {
  double best = -1.0;
  std::size_t best_i = 1;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    if (exclude[i]) continue;
    double d = point_segment_distance(pts[i], a, b);
    if (d > best) {
      best = d;
      best_i = i;
    }
  }
  return best_i;
}

bool is_anchor(const RoadGraph &g, NodeId id) {
  const auto &nb = g.neighbors(id);
  if (nb.size() != 2) return true;
  return g.edge_type(id, *nb.begin()) != g.edge_type(id, *nb.rbegin());
}

std::pair<NodeId, NodeId> ekey(NodeId a, NodeId b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

RoadGraph rdp_simplify(const RoadGraph &g, double tolerance) {
  RoadGraph out;
  std::set<std::pair<NodeId, NodeId>> visited;
  std::vector<std::vector<NodeId>> chains;

  auto walk = [&](NodeId start, NodeId first) {
    std::vector<NodeId> chain{start, first};
    visited.insert(ekey(start, first));
    NodeId prev = start, cur = first;
    while (!is_anchor(g, cur) && cur != start) {
      const auto &nb = g.neighbors(cur);
      NodeId next = *nb.begin() == prev ? *nb.rbegin() : *nb.begin();
      visited.insert(ekey(cur, next));
      chain.push_back(next);
      prev = cur;
      cur = next;
    }
    chains.push_back(std::move(chain));
  };

  for (const auto &[id, n] : g.nodes()) {
    if (!is_anchor(g, id)) continue;
    out.add_node(id, n.pos);
    for (NodeId nb : n.neighbors)
      if (!visited.contains(ekey(id, nb))) walk(id, nb);
  }
  // Cycles made only of degree-2 nodes: anchor each at its smallest id.
  for (const auto &[id, n] : g.nodes()) {
    if (n.neighbors.empty() || visited.contains(ekey(id, *n.neighbors.begin()))) continue;
    out.add_node(id, n.pos);
    walk(id, *n.neighbors.begin());
  }

  for (const auto &chain : chains) {
    std::vector<Vec2> pts;
    for (NodeId id : chain) pts.push_back(g.position(id));
    const std::size_t last = pts.size() - 1;
    std::vector<bool> keep(pts.size(), false);
    keep.front() = keep.back() = true;
    const bool loop = chain.front() == chain.back();
    if (loop) {
      // A closed chain needs two interior nodes to stay a simple cycle.
      std::size_t far = 1;
      for (std::size_t i = 1; i < last; ++i)
        if (distance(pts[i], pts[0]) > distance(pts[far], pts[0])) far = i;
      keep[far] = true;
      rdp_mark(pts, 0, far, tolerance, keep);
      rdp_mark(pts, far, last, tolerance, keep);
      if (std::count(keep.begin(), keep.end(), true) < 4 && last >= 3)
        keep[farthest_from_segment(pts, pts[0], pts[far], keep)] = true;
    } else {
      rdp_mark(pts, 0, last, tolerance, keep);
      bool direct = std::count(keep.begin(), keep.end(), true) == 2;
      if (direct && last >= 2 && out.has_edge(chain.front(), chain.back())) {
        std::size_t i = farthest_from_segment(pts, pts[0], pts[last], keep);
        keep[i] = true;
      }
    }
    auto type = g.edge_type(chain[0], chain[1]);
    NodeId prev = chain.front();
    for (std::size_t i = 1; i <= last; ++i) {
      if (!keep[i]) continue;
      NodeId id = chain[i];
      if (!out.has_node(id)) out.add_node(id, pts[i]);
      out.add_edge(prev, id, type);
      prev = id;
    }
  }
  return out;
}

RoadGraph subdivide(const RoadGraph &g, double max_edge) {
  if (max_edge <= 0.0) throw std::invalid_argument("max_edge must be positive");
  RoadGraph out = g;
  for (const auto &e : g.edges()) {
    Vec2 pa = g.position(e.a), pb = g.position(e.b);
    double len = distance(pa, pb);
    auto pieces = static_cast<std::size_t>(std::ceil(len / max_edge - 1e-9));
    if (pieces <= 1) continue;
    out.remove_edge(e.a, e.b);
    NodeId prev = e.a;
    for (std::size_t i = 1; i < pieces; ++i) {
      double t = static_cast<double>(i) / static_cast<double>(pieces);
      NodeId id = out.add_node(pa + (pb - pa) * t);
      out.add_edge(prev, id, e.type);
      prev = id;
    }
    out.add_edge(prev, e.b, e.type);
  }
  return out;
}

namespace {
double min_gap(std::vector<double> &headings) {
  if (headings.size() < 2) return kTwoPi;
  std::sort(headings.begin(), headings.end());
  double best = headings.front() + kTwoPi - headings.back();
  for (std::size_t i = 1; i < headings.size(); ++i)
    best = std::min(best, headings[i] - headings[i - 1]);
  return best;
}
}  // namespace

double min_incident_angle(const RoadGraph &g, NodeId node) {
  std::vector<double> h;
  Vec2 c = g.position(node);
  for (NodeId nb : g.neighbors(node)) h.push_back(heading(g.position(nb) - c));
  return min_gap(h);
}

double min_incident_angle_with(const RoadGraph &g, NodeId node, Vec2 extra) {
  std::vector<double> h;
  Vec2 c = g.position(node);
  for (NodeId nb : g.neighbors(node)) h.push_back(heading(g.position(nb) - c));
  h.push_back(heading(extra - c));
  return min_gap(h);
}

LocalStats local_stats(const RoadGraph &g, NodeId node) {
  LocalStats s;
  s.degree = g.degree(node);
  Vec2 p = g.position(node);
  for (std::size_t i = 0; i < kDensityRadii.size(); ++i)
    s.density[i] = g.count_within(p, kDensityRadii[i]);
  s.min_angle = min_incident_angle(g, node);
  return s;
}

}  // namespace ntg
