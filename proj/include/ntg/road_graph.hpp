#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ntg/geometry.hpp"

namespace ntg {

using NodeId = std::int64_t;

enum class RoadType : std::uint8_t { Major, Minor };

const char *to_string(RoadType t);
RoadType road_type_from_string(const std::string &s);

/// Nodes closer than this are considered the same location.
inline constexpr double kMergeTolerance = 0.5;

/// Raised for malformed input data (files, rasters, graphs from outside).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid bucket index over node positions.
class GridIndex {
 public:
  explicit GridIndex(double cell_size = 100.0) : cell_(cell_size) {}

  void insert(NodeId id, Vec2 p);
  void erase(NodeId id, Vec2 p);
  void clear() { cells_.clear(); }

  /// Calls fn(id) for every id whose cell overlaps the disc (p, radius).
  /// Candidates still need an exact distance test.
  template <class Fn>
  void for_each_candidate(Vec2 p, double radius, Fn &&fn) const {
    auto [cx0, cy0] = cell_of({p.x - radius, p.y - radius});
    auto [cx1, cy1] = cell_of({p.x + radius, p.y + radius});
    for (std::int64_t cx = cx0; cx <= cx1; ++cx) {
      for (std::int64_t cy = cy0; cy <= cy1; ++cy) {
        auto it = cells_.find(key(cx, cy));
        if (it == cells_.end()) continue;
        for (NodeId id : it->second) fn(id);
      }
    }
  }

  double cell_size() const { return cell_; }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(Vec2 p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cell_)),
            static_cast<std::int64_t>(std::floor(p.y / cell_))};
  }
  static std::uint64_t key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
           static_cast<std::uint32_t>(cy);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<NodeId>> cells_;
};

struct Edge {
  NodeId a;  // a < b
  NodeId b;
  std::optional<RoadType> type;
  bool operator==(const Edge &) const = default;
};

/// Planar undirected road graph with metric node coordinates.
///
/// Adjacency is kept symmetric by every mutator. Edge types are optional, but
/// a graph that carries them must type every edge (see validate_invariants).
class RoadGraph {
 public:
  struct Node {
    Vec2 pos;
    std::set<NodeId> neighbors;
  };

  RoadGraph() = default;

  NodeId add_node(Vec2 p);
  void add_node(NodeId id, Vec2 p);
  void remove_node(NodeId id);
  void move_node(NodeId id, Vec2 p);

  /// Returns false if the edge already existed (its type is then updated if
  /// one is given).
  bool add_edge(NodeId a, NodeId b, std::optional<RoadType> type = std::nullopt);
  bool remove_edge(NodeId a, NodeId b);

  bool has_node(NodeId id) const { return nodes_.contains(id); }
  bool has_edge(NodeId a, NodeId b) const;
  Vec2 position(NodeId id) const { return node(id).pos; }
  const std::set<NodeId> &neighbors(NodeId id) const { return node(id).neighbors; }
  std::size_t degree(NodeId id) const { return node(id).neighbors.size(); }
  std::optional<RoadType> edge_type(NodeId a, NodeId b) const;
  void set_edge_type(NodeId a, NodeId b, std::optional<RoadType> type);
  bool has_edge_types() const { return !types_.empty(); }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  bool empty() const { return nodes_.empty(); }
  const std::map<NodeId, Node> &nodes() const { return nodes_; }
  std::vector<NodeId> node_ids() const;
  /// All edges with a < b, sorted lexicographically.
  std::vector<Edge> edges() const;
  NodeId next_id() const { return nodes_.empty() ? 0 : nodes_.rbegin()->first + 1; }

  BBox bbox() const;
  double total_length() const;
  double edge_length(NodeId a, NodeId b) const { return distance(position(a), position(b)); }

  /// Nearest node with distance <= radius.
  std::optional<NodeId> nearest_within(Vec2 p, double radius) const;
  /// All nodes with distance <= radius, ascending id.
  std::vector<NodeId> nodes_within(Vec2 p, double radius) const;
  std::size_t count_within(Vec2 p, double radius) const;

  /// Structural equality: same ids, positions, adjacency and edge types.
  bool operator==(const RoadGraph &o) const;

 private:
  const Node &node(NodeId id) const;
  static std::pair<NodeId, NodeId> key(NodeId a, NodeId b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }

  std::map<NodeId, Node> nodes_;
  std::map<std::pair<NodeId, NodeId>, RoadType> types_;
  GridIndex index_{100.0};
  std::size_t edge_count_ = 0;
};

/// Lists violated RoadGraph invariants (empty when valid).
std::vector<std::string> validate_invariants(const RoadGraph &g);

/// Connected components, each sorted ascending, ordered by smallest member id.
std::vector<std::vector<NodeId>> connected_components(const RoadGraph &g);

RoadGraph induced_subgraph(const RoadGraph &g, const std::vector<NodeId> &ids);

/// Largest component by node count (ties: the one with the smallest id).
RoadGraph largest_component(const RoadGraph &g);

/// Copy of g with node ids renumbered 0..n-1 in ascending original order.
RoadGraph renumbered(const RoadGraph &g);

}  // namespace ntg
