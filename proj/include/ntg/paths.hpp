#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ntg/road_graph.hpp"

namespace ntg {

using Rng = std::mt19937_64;

/// Acyclic incoming path: node ids ordered from the far end to the target,
/// target last. length() counts the nodes before the target.
struct Path {
  std::vector<NodeId> nodes;

  NodeId target() const { return nodes.back(); }
  std::size_t length() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  auto operator<=>(const Path &) const = default;
};

/// Polar form of a motion step: segment length and turn relative to the
/// previous segment's heading.
struct PolarStep {
  double r = 0.0;
  double theta = 0.0;
  auto operator<=>(const PolarStep &) const = default;
};

std::vector<Vec2> path_positions(const RoadGraph &g, const Path &p);

/// Cartesian offsets between consecutive positions.
std::vector<Vec2> motion_sequence(std::span<const Vec2> positions);
std::vector<Vec2> motion_sequence(const RoadGraph &g, const Path &p);

/// Rotation-invariant polar steps; the first step has theta = 0. Throws on a
/// zero-length segment.
std::vector<PolarStep> polar_motion_sequence(std::span<const Vec2> positions);
std::vector<PolarStep> polar_motion_sequence(const RoadGraph &g, const Path &p);

/// Inverse of polar_motion_sequence given the heading of the first segment.
std::vector<Vec2> polar_to_cartesian(std::span<const PolarStep> steps, double first_heading);

/// Up to k distinct acyclic incoming paths ending at `node`, drawn as random
/// walks away from the node (each at most max_len nodes before the target),
/// returned sorted. Throws if the node has no neighbours.
std::vector<Path> sample_incoming_paths(const RoadGraph &g, NodeId node, std::size_t k,
                                        std::size_t max_len, Rng &rng);

/// Number of acyclic incoming paths with at most max_len nodes before the
/// target, counting stops at `cap`.
std::size_t count_incoming_paths(const RoadGraph &g, NodeId node, std::size_t max_len,
                                 std::size_t cap);

/// Indices of `targets` sorted counter-clockwise around center, starting
/// from east; equal angles are ordered by distance.
std::vector<std::size_t> ccw_order(Vec2 center, std::span<const Vec2> targets);
std::vector<NodeId> ccw_sort(const RoadGraph &g, NodeId center, std::span<const NodeId> targets);

}  // namespace ntg
