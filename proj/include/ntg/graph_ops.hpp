#pragma once

#include <array>
#include <optional>

#include "ntg/road_graph.hpp"

namespace ntg {

/// Nearest node within eps (inclusive).
std::optional<NodeId> snap(const RoadGraph &g, Vec2 p, double eps);

/// Removes degree-2 chain nodes whose deviation from the simplified polyline
/// is within tolerance (Ramer-Douglas-Peucker per chain). Junctions, dead
/// ends and road-type changes are kept, as is anything needed to avoid
/// creating duplicate edges or self-loops.
RoadGraph rdp_simplify(const RoadGraph &g, double tolerance);

/// Splits every edge longer than max_edge into equal pieces.
RoadGraph subdivide(const RoadGraph &g, double max_edge);

inline constexpr std::array<double, 3> kDensityRadii{100.0, 200.0, 300.0};

struct LocalStats {
  std::size_t degree = 0;
  std::array<std::size_t, 3> density{};  // node counts within kDensityRadii, self included
  double min_angle = kTwoPi;
};

/// Smallest angle between ccw-consecutive incident edges; 2pi below degree 2.
double min_incident_angle(const RoadGraph &g, NodeId node);

/// Same, as if an extra edge towards `extra` were attached to the node.
double min_incident_angle_with(const RoadGraph &g, NodeId node, Vec2 extra);

LocalStats local_stats(const RoadGraph &g, NodeId node);

}  // namespace ntg
