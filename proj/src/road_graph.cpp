#include "ntg/road_graph.hpp"

#include <algorithm>
#include <deque>

namespace ntg {

const char *to_string(RoadType t) { return t == RoadType::Major ? "major" : "minor"; }

RoadType road_type_from_string(const std::string &s) {
  if (s == "major") return RoadType::Major;
  if (s == "minor") return RoadType::Minor;
  throw DataError("unknown road type '" + s + "'");
}

void GridIndex::insert(NodeId id, Vec2 p) {
  auto [cx, cy] = cell_of(p);
  cells_[key(cx, cy)].push_back(id);
}

void GridIndex::erase(NodeId id, Vec2 p) {
  auto [cx, cy] = cell_of(p);
  auto it = cells_.find(key(cx, cy));
  if (it == cells_.end()) return;
  auto &v = it->second;
  v.erase(std::remove(v.begin(), v.end(), id), v.end());
  if (v.empty()) cells_.erase(it);
}

const RoadGraph::Node &RoadGraph::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw std::out_of_range("unknown node id " + std::to_string(id));
  return it->second;
}

NodeId RoadGraph::add_node(Vec2 p) {
  NodeId id = next_id();
  add_node(id, p);
  return id;
}

void RoadGraph::add_node(NodeId id, Vec2 p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y))
    throw std::invalid_argument("non-finite node coordinate");
  auto [it, inserted] = nodes_.emplace(id, Node{p, {}});
  if (!inserted) throw std::invalid_argument("duplicate node id " + std::to_string(id));
  index_.insert(id, p);
}

void RoadGraph::remove_node(NodeId id) {
  auto nbrs = node(id).neighbors;
  for (NodeId n : nbrs) remove_edge(id, n);
  index_.erase(id, nodes_.at(id).pos);
  nodes_.erase(id);
}

void RoadGraph::move_node(NodeId id, Vec2 p) {
  auto &n = nodes_.at(id);
  index_.erase(id, n.pos);
  n.pos = p;
  index_.insert(id, p);
}

bool RoadGraph::add_edge(NodeId a, NodeId b, std::optional<RoadType> type) {
  if (a == b) throw std::invalid_argument("self-loop on node " + std::to_string(a));
  auto ia = nodes_.find(a);
  auto ib = nodes_.find(b);
  if (ia == nodes_.end() || ib == nodes_.end())
    throw std::out_of_range("edge endpoint missing");
  bool inserted = ia->second.neighbors.insert(b).second;
  ib->second.neighbors.insert(a);
  if (inserted) ++edge_count_;
  if (type) types_[key(a, b)] = *type;
  return inserted;
}

bool RoadGraph::remove_edge(NodeId a, NodeId b) {
  auto ia = nodes_.find(a);
  auto ib = nodes_.find(b);
  if (ia == nodes_.end() || ib == nodes_.end()) return false;
  if (ia->second.neighbors.erase(b) == 0) return false;
  ib->second.neighbors.erase(a);
  types_.erase(key(a, b));
  --edge_count_;
  return true;
}

bool RoadGraph::has_edge(NodeId a, NodeId b) const {
  auto it = nodes_.find(a);
  return it != nodes_.end() && it->second.neighbors.contains(b);
}

std::optional<RoadType> RoadGraph::edge_type(NodeId a, NodeId b) const {
  auto it = types_.find(key(a, b));
  if (it == types_.end()) return std::nullopt;
  return it->second;
}

void RoadGraph::set_edge_type(NodeId a, NodeId b, std::optional<RoadType> type) {
  if (!has_edge(a, b)) throw std::out_of_range("no such edge");
  if (type)
    types_[key(a, b)] = *type;
  else
    types_.erase(key(a, b));
}

std::vector<NodeId> RoadGraph::node_ids() const {
  std::vector<NodeId> ids;
  ids.reserve(nodes_.size());
  for (const auto &[id, _] : nodes_) ids.push_back(id);
  return ids;
}

std::vector<Edge> RoadGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (const auto &[id, n] : nodes_) {
    for (auto it = n.neighbors.upper_bound(id); it != n.neighbors.end(); ++it)
      out.push_back({id, *it, edge_type(id, *it)});
  }
  return out;
}

BBox RoadGraph::bbox() const {
  BBox b;
  for (const auto &[_, n] : nodes_) b.extend(n.pos);
  return b;
}

double RoadGraph::total_length() const {
  double sum = 0.0;
  for (const auto &e : edges()) sum += edge_length(e.a, e.b);
  return sum;
}

std::optional<NodeId> RoadGraph::nearest_within(Vec2 p, double radius) const {
  std::optional<NodeId> best;
  double best_d = std::numeric_limits<double>::infinity();
  index_.for_each_candidate(p, radius, [&](NodeId id) {
    double d = distance(nodes_.at(id).pos, p);
    if (d <= radius && (d < best_d || (d == best_d && id < *best))) {
      best_d = d;
      best = id;
    }
  });
  return best;
}

std::vector<NodeId> RoadGraph::nodes_within(Vec2 p, double radius) const {
  std::vector<NodeId> out;
  index_.for_each_candidate(p, radius, [&](NodeId id) {
    if (distance(nodes_.at(id).pos, p) <= radius) out.push_back(id);
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t RoadGraph::count_within(Vec2 p, double radius) const {
  std::size_t n = 0;
  index_.for_each_candidate(p, radius, [&](NodeId id) {
    if (distance(nodes_.at(id).pos, p) <= radius) ++n;
  });
  return n;
}

bool RoadGraph::operator==(const RoadGraph &o) const {
  if (nodes_.size() != o.nodes_.size() || edge_count_ != o.edge_count_) return false;
  for (auto i = nodes_.begin(), j = o.nodes_.begin(); i != nodes_.end(); ++i, ++j) {
    if (i->first != j->first || !(i->second.pos == j->second.pos) ||
        i->second.neighbors != j->second.neighbors)
      return false;
  }
  return types_ == o.types_;
}

std::vector<std::string> validate_invariants(const RoadGraph &g) {
  std::vector<std::string> errs;
  for (const auto &[id, n] : g.nodes()) {
    for (NodeId nb : n.neighbors) {
      if (nb == id) errs.push_back("self-loop at " + std::to_string(id));
      if (!g.has_node(nb)) {
        errs.push_back("dangling neighbor " + std::to_string(nb));
        continue;
      }
      if (!g.neighbors(nb).contains(id))
        errs.push_back("asymmetric edge " + std::to_string(id) + "-" + std::to_string(nb));
    }
    for (NodeId other : g.nodes_within(n.pos, kMergeTolerance)) {
      if (other != id && distance(g.position(other), n.pos) < kMergeTolerance && other > id)
        errs.push_back("nodes " + std::to_string(id) + " and " + std::to_string(other) +
                       " closer than merge tolerance");
    }
  }
  if (g.has_edge_types()) {
    for (const auto &e : g.edges())
      if (!e.type)
        errs.push_back("untyped edge " + std::to_string(e.a) + "-" + std::to_string(e.b));
  }
  return errs;
}

std::vector<std::vector<NodeId>> connected_components(const RoadGraph &g) {
  std::vector<std::vector<NodeId>> comps;
  std::set<NodeId> seen;
  for (const auto &[id, _] : g.nodes()) {
    if (seen.contains(id)) continue;
    std::vector<NodeId> comp;
    std::deque<NodeId> frontier{id};
    seen.insert(id);
    while (!frontier.empty()) {
      NodeId cur = frontier.front();
      frontier.pop_front();
      comp.push_back(cur);
      for (NodeId nb : g.neighbors(cur))
        if (seen.insert(nb).second) frontier.push_back(nb);
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

RoadGraph induced_subgraph(const RoadGraph &g, const std::vector<NodeId> &ids) {
  RoadGraph out;
  std::set<NodeId> keep(ids.begin(), ids.end());
  for (NodeId id : keep) out.add_node(id, g.position(id));
  for (NodeId id : keep)
    for (NodeId nb : g.neighbors(id))
      if (id < nb && keep.contains(nb)) out.add_edge(id, nb, g.edge_type(id, nb));
  return out;
}

RoadGraph largest_component(const RoadGraph &g) {
  auto comps = connected_components(g);
  if (comps.empty()) return {};
  const std::vector<NodeId> *best = &comps.front();
  for (const auto &c : comps)
    if (c.size() > best->size()) best = &c;
  return induced_subgraph(g, *best);
}

RoadGraph renumbered(const RoadGraph &g) {
  RoadGraph out;
  std::map<NodeId, NodeId> remap;
  for (const auto &[id, n] : g.nodes()) {
    NodeId nid = static_cast<NodeId>(remap.size());
    remap[id] = nid;
    out.add_node(nid, n.pos);
  }
  for (const auto &e : g.edges()) out.add_edge(remap[e.a], remap[e.b], e.type);
  return out;
}

}  // namespace ntg
