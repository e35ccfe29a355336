#include "ntg/paths.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ntg {

std::vector<Vec2> path_positions(const RoadGraph &g, const Path &p) {
  std::vector<Vec2> out;
  out.reserve(p.nodes.size());
  for (NodeId id : p.nodes) out.push_back(g.position(id));
  return out;
}

std::vector<Vec2> motion_sequence(std::span<const Vec2> positions) {
  std::vector<Vec2> out;
  for (std::size_t i = 1; i < positions.size(); ++i)
    out.push_back(positions[i] - positions[i - 1]);
  return out;
}

std::vector<Vec2> motion_sequence(const RoadGraph &g, const Path &p) {
  auto pos = path_positions(g, p);
  return motion_sequence(pos);
}

std::vector<PolarStep> polar_motion_sequence(std::span<const Vec2> positions) {
  if (positions.size() < 2) throw std::invalid_argument("polar motion needs >= 2 nodes");
  std::vector<PolarStep> out;
  double prev_heading = 0.0;
  for (std::size_t i = 1; i < positions.size(); ++i) {
    Vec2 d = positions[i] - positions[i - 1];
    double r = d.norm();
    if (r == 0.0) throw std::invalid_argument("zero-length segment in path");
    double h = std::atan2(d.y, d.x);
    double theta = i == 1 ? 0.0 : wrap_angle(h - prev_heading);
    out.push_back({r, theta});
    prev_heading = h;
  }
  return out;
}

std::vector<PolarStep> polar_motion_sequence(const RoadGraph &g, const Path &p) {
  auto pos = path_positions(g, p);
  return polar_motion_sequence(pos);
}

std::vector<Vec2> polar_to_cartesian(std::span<const PolarStep> steps, double first_heading) {
  std::vector<Vec2> out;
  double h = first_heading;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) h += steps[i].theta;
    out.push_back({steps[i].r * std::cos(h), steps[i].r * std::sin(h)});
  }
  return out;
}

std::vector<Path> sample_incoming_paths(const RoadGraph &g, NodeId node, std::size_t k,
                                        std::size_t max_len, Rng &rng) {
  if (g.degree(node) == 0) throw std::invalid_argument("no incoming paths");
  if (k == 0 || max_len == 0) return {};
  std::set<Path> found;
  // Bounded number of attempts: small neighbourhoods may hold fewer than k paths.
  const std::size_t attempts = 4 * k;
  std::vector<NodeId> candidates;
  for (std::size_t a = 0; a < attempts && found.size() < k; ++a) {
    std::size_t len = std::uniform_int_distribution<std::size_t>(1, max_len)(rng);
    std::vector<NodeId> walk{node};
    std::set<NodeId> visited{node};
    while (walk.size() - 1 < len) {
      candidates.clear();
      for (NodeId nb : g.neighbors(walk.back()))
        if (!visited.contains(nb)) candidates.push_back(nb);
      if (candidates.empty()) break;
      NodeId next = candidates[std::uniform_int_distribution<std::size_t>(
          0, candidates.size() - 1)(rng)];
      walk.push_back(next);
      visited.insert(next);
    }
    std::reverse(walk.begin(), walk.end());
    found.insert(Path{std::move(walk)});
  }
  return {found.begin(), found.end()};
}

namespace {
void count_dfs(const RoadGraph &g, NodeId cur, std::size_t depth, std::size_t max_len,
               std::size_t cap, std::set<NodeId> &visited, std::size_t &count) {
  for (NodeId nb : g.neighbors(cur)) {
    if (count >= cap) return;
    if (visited.contains(nb)) continue;
    ++count;
    if (depth + 1 < max_len) {
      visited.insert(nb);
      count_dfs(g, nb, depth + 1, max_len, cap, visited, count);
      visited.erase(nb);
    }
  }
}
}  // namespace

std::size_t count_incoming_paths(const RoadGraph &g, NodeId node, std::size_t max_len,
                                 std::size_t cap) {
  std::size_t count = 0;
  std::set<NodeId> visited{node};
  if (max_len > 0) count_dfs(g, node, 0, max_len, cap, visited, count);
  return count;
}

std::vector<std::size_t> ccw_order(Vec2 center, std::span<const Vec2> targets) {
  std::vector<std::size_t> idx(targets.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> ang(targets.size()), dist(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ang[i] = heading(targets[i] - center);
    dist[i] = distance(targets[i], center);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (ang[a] != ang[b]) return ang[a] < ang[b];
    return dist[a] < dist[b];
  });
  return idx;
}

std::vector<NodeId> ccw_sort(const RoadGraph &g, NodeId center, std::span<const NodeId> targets) {
  std::vector<Vec2> pos;
  pos.reserve(targets.size());
  for (NodeId t : targets) pos.push_back(g.position(t));
  auto order = ccw_order(g.position(center), pos);
  std::vector<NodeId> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(targets[i]);
  return out;
}

}  // namespace ntg
