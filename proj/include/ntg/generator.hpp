#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntg/network.hpp"
#include "ntg/raster.hpp"

namespace ntg {

/// Training-set extremes enforced during generation.
struct Limits {
  std::size_t max_degree = 8;
  std::size_t max_density = 1000000;  // nodes within 100 m, self included
  double min_angle = 0.0;       // radians
  bool operator==(const Limits &) const = default;
};

Limits limits_from_dataset(std::span<const RoadGraph> graphs);
nlohmann::json to_json(const Limits &l);
Limits limits_from_json(const nlohmann::json &j);

struct GenOptions {
  double eps = 5.0;           // snapping radius, inclusive
  double temperature = 1.0;   // 0 = greedy
  int retries = 3;            // samples per decoded slot
  double region_margin = 500.0;
  std::optional<BBox> region;  // overrides seed bbox + margin
  std::size_t max_decode_steps = 12;
  double angle_tolerance = 1e-6;
};

/// Likelihood prior for parsing: joint(dx, dy) ~ prior_x * prior_y * L^lambda.
struct PriorOptions {
  std::shared_ptr<const LikelihoodRaster> likelihood;
  double lambda = 1.0;
  double stop_threshold = 0.05;
};

enum class EventKind { NodeAdded, EdgeAdded, NodeSnapped, NodeRejected, NodeFinished, QueueExhausted };
const char *to_string(EventKind k);

struct GenEvent {
  EventKind kind = EventKind::NodeAdded;
  long step = 0;
  NodeId node = -1;   // added / snapped-to / finished node, edge end a
  NodeId other = -1;  // active node, edge end b
  Vec2 pos;           // node or candidate position
  std::string reason;
  int queue = -1;
  bool existing = false;  // snapped onto an edge that was already there
  std::optional<RoadType> type;
};

/// One JSON object: kind, step, ids and coordinates with three decimals.
std::string to_json_string(const GenEvent &e);
GenEvent event_from_json(const nlohmann::json &j);

/// Folds node_added / edge_added events into a graph.
RoadGraph replay(std::span<const GenEvent> events);

enum class SessionStatus { Active, Exhausted, BudgetReached };
const char *to_string(SessionStatus s);

class Exhausted : public std::runtime_error {
 public:
  Exhausted() : std::runtime_error("exhausted") {}
};

struct GenSession {
  RoadGraph graph;
  std::vector<std::deque<NodeId>> queues;  // one per seed component
  std::size_t cursor = 0;                  // round-robin position
  std::optional<int> style;
  Limits limits;
  GenOptions options;
  PriorOptions prior;
  std::shared_ptr<const LikelihoodRaster> attr_raster;  // raster-attribute models
  Rng rng;
  std::uint64_t seed = 0;
  long step = 0;
  BBox region;
  std::set<NodeId> queued;  // every id ever enqueued
  std::vector<GenEvent> events;
  SessionStatus status = SessionStatus::Active;
  double max_edge = 0.0;
  bool typed = false;

  bool exhausted() const;
};

/// Seed nodes go to their component's queue in ascending id order; the seed
/// itself is logged as step-0 events so a replay starts from nothing.
GenSession init_session(const RoadGraph &seed_graph, std::optional<int> style, const Limits &limits,
                        std::uint64_t rng_seed, const GenOptions &opt = {});

/// Session whose queues hold exactly the given nodes (one queue each
/// component they belong to).
GenSession init_session_with_queue(const RoadGraph &graph, const std::vector<NodeId> &queue_nodes,
                                   std::optional<int> style, const Limits &limits,
                                   std::uint64_t rng_seed, const GenOptions &opt = {});

/// Expands the next queued node. Throws Exhausted when every queue is empty.
std::vector<GenEvent> step(GenSession &s, const ModelParams &model);

struct Budget {
  std::optional<std::size_t> max_nodes;
  std::optional<long> max_steps;
};

/// Steps until the queues run dry or the budget is spent.
RoadGraph generate(GenSession &s, const ModelParams &model, const Budget &budget = {});

/// Extends a graph from its degree-1 nodes; the input is preserved exactly.
RoadGraph complete(const RoadGraph &g, const ModelParams &model, std::optional<int> style,
                   const Limits &limits, std::uint64_t rng_seed, const Budget &budget,
                   const GenOptions &opt = {});

/// Violations of RoadGraph invariants, Limits and planarity.
std::vector<std::string> validate_generated(const RoadGraph &g, const Limits &limits,
                                            double angle_tolerance = 1e-6);

/// Segment pairs that cross or overlap (edges sharing an end only count when
/// collinear and overlapping).
std::vector<std::pair<Edge, Edge>> crossing_edges(const RoadGraph &g);

}  // namespace ntg
