#pragma once

// Shared fixtures for the test suites.

#include <algorithm>
#include <random>
#include <vector>

#include "ntg/road_graph.hpp"

namespace ntg::testing {

/// rows x cols lattice with the given spacing; node id = r * cols + c at
/// (origin.x + c * spacing, origin.y + r * spacing).
inline RoadGraph make_grid(int rows, int cols, double spacing, Vec2 origin = {0.0, 0.0}) {
  RoadGraph g;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      g.add_node(r * cols + c, {origin.x + c * spacing, origin.y + r * spacing});
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      NodeId id = r * cols + c;
      if (c + 1 < cols) g.add_edge(id, id + 1);
      if (r + 1 < rows) g.add_edge(id, id + cols);
    }
  }
  return g;
}

/// Polyline along +x with `n` nodes spaced `spacing` apart.
inline RoadGraph make_line(int n, double spacing, Vec2 origin = {0.0, 0.0}) {
  RoadGraph g;
  for (int i = 0; i < n; ++i) g.add_node(i, {origin.x + i * spacing, origin.y});
  for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

/// Planar graph over n random points: candidate edges shorter than
/// max_edge are added shortest-first unless they would cross an existing
/// edge. Points keep at least min_sep apart. The result may be disconnected.
inline RoadGraph random_planar_graph(int n, double extent, double max_edge, std::uint64_t seed,
                                     double min_sep = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  RoadGraph g;
  int guard = 0;
  while (static_cast<int>(g.node_count()) < n && guard++ < 100000) {
    Vec2 p{std::round(u(rng) * 1000.0) / 1000.0, std::round(u(rng) * 1000.0) / 1000.0};
    if (g.nearest_within(p, min_sep)) continue;
    g.add_node(p);
  }
  struct Cand {
    double len;
    NodeId a, b;
  };
  std::vector<Cand> cands;
  auto ids = g.node_ids();
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      double d = distance(g.position(ids[i]), g.position(ids[j]));
      if (d <= max_edge) cands.push_back({d, ids[i], ids[j]});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand &x, const Cand &y) {
    return x.len < y.len || (x.len == y.len && std::pair(x.a, x.b) < std::pair(y.a, y.b));
  });
  std::vector<std::pair<NodeId, NodeId>> added;
  for (const auto &c : cands) {
    Vec2 pa = g.position(c.a), pb = g.position(c.b);
    bool ok = true;
    for (auto [x, y] : added) {
      if (x == c.a || x == c.b || y == c.a || y == c.b) continue;
      if (segments_intersect(pa, pb, g.position(x), g.position(y))) {
        ok = false;
        break;
      }
    }
    // Reject edges that pass right next to a third node.
    if (ok) {
      for (NodeId id : ids) {
        if (id == c.a || id == c.b) continue;
        if (point_segment_distance(g.position(id), pa, pb) < 1.0) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      g.add_edge(c.a, c.b);
      added.emplace_back(c.a, c.b);
    }
  }
  return g;
}

/// Random connected planar graph (largest component of random_planar_graph).
inline RoadGraph random_connected_graph(int n, double extent, double max_edge, std::uint64_t seed) {
  return renumbered(largest_component(random_planar_graph(n, extent, max_edge, seed)));
}

}  // namespace ntg::testing
