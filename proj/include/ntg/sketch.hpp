#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntg/paths.hpp"
#include "ntg/road_graph.hpp"

namespace ntg {

/// Stored root-node template: arm headings in radians, ccw from east.
struct NodeTemplate {
  std::string name;
  std::vector<double> headings;
};

const std::vector<NodeTemplate> &node_templates();
const NodeTemplate &find_template(const std::string &name);

/// Centre node 0 with one arm node per heading (ids 1..n), rotated ccw.
RoadGraph template_graph(const NodeTemplate &t, Vec2 center, double arm, double rotation = 0.0);

/// Random template, rotation and arm length in [arm_min, arm_max].
RoadGraph random_template_seed(Rng &rng, Vec2 center = {}, double arm_min = 20.0,
                               double arm_max = 80.0);

struct TemplateMatch {
  NodeId node;
  std::string name;
  double rotation;  // template rotation that best fits the junction
  double residual;  // mean absolute angular deviation, radians
};

/// Best template with the node's degree, if any.
std::optional<TemplateMatch> match_junction(const RoadGraph &g, NodeId node);

struct SketchOptions {
  double resolution = 1.0;
  double eps = 5.0;         // endpoint snapping radius
  double max_edge = 100.0;  // seed edges are subdivided to the decoder range
};

struct SketchSeed {
  RoadGraph graph;
  std::vector<TemplateMatch> junctions;
  std::vector<std::string> warnings;
};

/// Strokes (metric polylines) to a seed graph: points snap to the
/// resolution lattice, stroke ends within eps join the nearest stroke,
/// crossings become junctions, then chains are simplified and subdivided.
/// Throws DataError when no usable stroke remains.
SketchSeed match_template(const std::vector<std::vector<Vec2>> &strokes, const SketchOptions &opt = {});

}  // namespace ntg
