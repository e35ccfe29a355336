#include "ntg/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ntg/aerial.hpp"
#include "ntg/graph_io.hpp"
#include "ntg/graph_ops.hpp"

namespace ntg {

Limits limits_from_dataset(std::span<const RoadGraph> graphs) {
  if (graphs.empty()) throw std::invalid_argument("limits need at least one graph");
  Limits l{0, 0, kTwoPi};
  for (const auto &g : graphs) {
    for (const auto &[id, n] : g.nodes()) {
      LocalStats s = local_stats(g, id);
      l.max_degree = std::max(l.max_degree, s.degree);
      l.max_density = std::max(l.max_density, s.density[0]);
      l.min_angle = std::min(l.min_angle, s.min_angle);
    }
  }
  return l;
}

nlohmann::json to_json(const Limits &l) {
  return {{"max_degree", l.max_degree}, {"max_density", l.max_density}, {"min_angle", l.min_angle}};
}

Limits limits_from_json(const nlohmann::json &j) {
  try {
    return {j.at("max_degree").get<std::size_t>(), j.at("max_density").get<std::size_t>(),
            j.at("min_angle").get<double>()};
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("limits: ") + e.what());
  }
}

const char *to_string(EventKind k) {
  switch (k) {
    case EventKind::NodeAdded: return "node_added";
    case EventKind::EdgeAdded: return "edge_added";
    case EventKind::NodeSnapped: return "node_snapped";
    case EventKind::NodeRejected: return "node_rejected";
    case EventKind::NodeFinished: return "node_finished";
    case EventKind::QueueExhausted: return "queue_exhausted";
  }
  return "node_added";
}

const char *to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Active: return "active";
    case SessionStatus::Exhausted: return "exhausted";
    case SessionStatus::BudgetReached: return "budget_reached";
  }
  return "active";
}

std::string to_json_string(const GenEvent &e) {
  std::string s = "{\"kind\":\"";
  s += to_string(e.kind);
  s += "\",\"step\":" + std::to_string(e.step);
  auto id = [&](const char *k, NodeId v) { s += std::string(",\"") + k + "\":" + std::to_string(v); };
  auto xy = [&] { s += ",\"x\":" + format_mm(e.pos.x) + ",\"y\":" + format_mm(e.pos.y); };
  switch (e.kind) {
    case EventKind::NodeAdded:
      id("node", e.node);
      xy();
      id("from", e.other);
      s += ",\"queue\":" + std::to_string(e.queue);
      break;
    case EventKind::EdgeAdded:
      id("a", e.node);
      id("b", e.other);
      if (e.type) s += std::string(",\"type\":\"") + to_string(*e.type) + "\"";
      break;
    case EventKind::NodeSnapped:
      id("node", e.node);
      id("from", e.other);
      xy();
      s += std::string(",\"existing\":") + (e.existing ? "true" : "false");
      break;
    case EventKind::NodeRejected:
      id("from", e.other);
      xy();
      s += ",\"reason\":\"" + e.reason + "\"";
      break;
    case EventKind::NodeFinished:
      id("node", e.node);
      s += ",\"reason\":\"" + e.reason + "\"";
      break;
    case EventKind::QueueExhausted:
      s += ",\"queue\":" + std::to_string(e.queue);
      break;
  }
  s += "}";
  return s;
}

GenEvent event_from_json(const nlohmann::json &j) {
  GenEvent e;
  try {
    std::string kind = j.at("kind").get<std::string>();
    const EventKind kinds[] = {EventKind::NodeAdded,    EventKind::EdgeAdded,    EventKind::NodeSnapped,
                               EventKind::NodeRejected, EventKind::NodeFinished, EventKind::QueueExhausted};
    bool found = false;
    for (auto k : kinds)
      if (kind == to_string(k)) {
        e.kind = k;
        found = true;
      }
    if (!found) throw DataError("event: unknown kind " + kind);
    e.step = j.at("step").get<long>();
    if (e.kind == EventKind::EdgeAdded) {
      e.node = j.at("a").get<NodeId>();
      e.other = j.at("b").get<NodeId>();
      if (j.contains("type")) e.type = road_type_from_string(j["type"].get<std::string>());
    } else {
      e.node = j.value("node", NodeId{-1});
      e.other = j.value("from", NodeId{-1});
    }
    if (j.contains("x")) e.pos = {j["x"].get<double>(), j["y"].get<double>()};
    e.reason = j.value("reason", std::string());
    e.queue = j.value("queue", -1);
    e.existing = j.value("existing", false);
  } catch (const nlohmann::json::exception &ex) {
    throw DataError(std::string("event: ") + ex.what());
  }
  return e;
}

RoadGraph replay(std::span<const GenEvent> events) {
  RoadGraph g;
  for (const auto &e : events) {
    if (e.kind == EventKind::NodeAdded) g.add_node(e.node, e.pos);
    if (e.kind == EventKind::EdgeAdded) g.add_edge(e.node, e.other, e.type);
  }
  return g;
}

bool GenSession::exhausted() const {
  return std::all_of(queues.begin(), queues.end(), [](const auto &q) { return q.empty(); });
}

namespace {

double quantize_mm(double v) { return std::round(v * 1000.0) / 1000.0; }

double max_edge_length(const RoadGraph &g) {
  double m = 0.0;
  for (const auto &e : g.edges()) m = std::max(m, g.edge_length(e.a, e.b));
  return m;
}

// Overlap of two segments that share the endpoint s.
bool collinear_overlap(Vec2 s, Vec2 p, Vec2 q) {
  Vec2 a = p - s, b = q - s;
  double scale = a.norm() * b.norm();
  return std::abs(a.cross(b)) <= 1e-9 * scale && a.dot(b) > 0.0;
}

bool segment_conflict(const RoadGraph &g, NodeId a, Vec2 pa, NodeId b, Vec2 pb, NodeId u, NodeId v) {
  Vec2 pu = g.position(u), pv = g.position(v);
  if (u == a || u == b || v == a || v == b) {
    NodeId shared = (u == a || u == b) ? u : v;
    NodeId other_new = shared == a ? b : a;
    NodeId other_old = shared == u ? v : u;
    if (other_new == other_old) return false;
    Vec2 ps = shared == a ? pa : pb;
    return collinear_overlap(ps, other_new == a ? pa : pb, g.position(other_old));
  }
  return segments_intersect(pa, pb, pu, pv);
}

// True if segment (a, b) would cross an existing edge. b may be a new node
// (id -1).
bool crosses(const RoadGraph &g, double max_edge, NodeId a, Vec2 pa, NodeId b, Vec2 pb) {
  Vec2 mid = (pa + pb) * 0.5;
  double radius = distance(pa, pb) / 2 + max_edge + 1e-6;
  for (NodeId u : g.nodes_within(mid, radius)) {
    for (NodeId v : g.neighbors(u)) {
      if (v < u && distance(g.position(v), mid) <= radius) continue;  // seen from v
      if (segment_conflict(g, a, pa, b, pb, u, v)) return true;
    }
  }
  return false;
}

std::size_t sample_categorical(const VectorXd &logits, double temperature, Rng &rng) {
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  if (temperature <= 0.0) return static_cast<std::size_t>(best);
  VectorXd z = logits / temperature;
  VectorXd p = (z.array() - z.maxCoeff()).exp();
  double total = p.sum();
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(p.size() - 1);
}

VectorXd softmax(const VectorXd &v) {
  VectorXd e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

enum class Outcome { Added, Snapped, Rejected };

struct Placer {
  GenSession &s;
  std::vector<GenEvent> &out;
  std::size_t queue;

  void reject(NodeId active, Vec2 cand, const char *reason) {
    GenEvent e{EventKind::NodeRejected, s.step, -1, active, cand, reason};
    out.push_back(e);
  }

  bool angle_ok(NodeId node, Vec2 towards) const {
    if (s.graph.degree(node) == 0) return true;
    return min_incident_angle_with(s.graph, node, towards) >= s.limits.min_angle - s.options.angle_tolerance;
  }

  Outcome place(NodeId active, Vec2 cand, std::optional<RoadType> type) {
    auto &g = s.graph;
    const Vec2 pa = g.position(active);
    cand = {quantize_mm(cand.x), quantize_mm(cand.y)};
    if (auto hit = g.nearest_within(cand, s.options.eps)) {
      NodeId t = *hit;
      if (t == active) {
        reject(active, cand, "self");
        return Outcome::Rejected;
      }
      if (g.has_edge(active, t)) {
        GenEvent e{EventKind::NodeSnapped, s.step, t, active, cand};
        e.existing = true;
        out.push_back(e);
        return Outcome::Snapped;
      }
      if (g.degree(active) + 1 > s.limits.max_degree || g.degree(t) + 1 > s.limits.max_degree) {
        reject(active, cand, "degree");
        return Outcome::Rejected;
      }
      if (!angle_ok(active, g.position(t)) || !angle_ok(t, pa)) {
        reject(active, cand, "angle");
        return Outcome::Rejected;
      }
      if (crosses(g, s.max_edge, active, pa, t, g.position(t))) {
        reject(active, cand, "crossing");
        return Outcome::Rejected;
      }
      g.add_edge(active, t, type);
      s.max_edge = std::max(s.max_edge, g.edge_length(active, t));
      out.push_back(GenEvent{EventKind::NodeSnapped, s.step, t, active, cand});
      GenEvent e{EventKind::EdgeAdded, s.step, active, t};
      e.type = type;
      out.push_back(e);
      return Outcome::Snapped;
    }
    if (!s.region.contains(cand)) {
      reject(active, cand, "region");
      return Outcome::Rejected;
    }
    if (g.degree(active) + 1 > s.limits.max_degree) {
      reject(active, cand, "degree");
      return Outcome::Rejected;
    }
    if (!angle_ok(active, cand)) {
      reject(active, cand, "angle");
      return Outcome::Rejected;
    }
    constexpr double r = kDensityRadii[0];
    bool dense = g.count_within(cand, r) + 1 > s.limits.max_density;
    if (!dense) {
      for (NodeId u : g.nodes_within(cand, r)) {
        if (g.count_within(g.position(u), r) + 1 > s.limits.max_density) {
          dense = true;
          break;
        }
      }
    }
    if (dense) {
      reject(active, cand, "density");
      return Outcome::Rejected;
    }
    if (crosses(g, s.max_edge, active, pa, -1, cand)) {
      reject(active, cand, "crossing");
      return Outcome::Rejected;
    }
    NodeId id = g.next_id();
    g.add_node(id, cand);
    g.add_edge(active, id, type);
    s.max_edge = std::max(s.max_edge, distance(pa, cand));
    s.queues[queue].push_back(id);
    s.queued.insert(id);
    GenEvent added{EventKind::NodeAdded, s.step, id, active, cand};
    added.queue = static_cast<int>(queue);
    out.push_back(added);
    GenEvent edge{EventKind::EdgeAdded, s.step, active, id};
    edge.type = type;
    out.push_back(edge);
    return Outcome::Added;
  }
};

std::vector<PathInput> encoder_inputs(const GenSession &s, const ModelConfig &cfg,
                                      const std::vector<Path> &paths) {
  std::vector<PathInput> inputs;
  for (const auto &p : paths) {
    auto pos = path_positions(s.graph, p);
    std::size_t start = 0;
    if (cfg.encoder_mode == EncoderMode::DiscreteCartesian) {
      // keep the longest representable suffix next to the target
      for (std::size_t i = pos.size() - 1; i-- > 0;) {
        Vec2 d = pos[i + 1] - pos[i];
        auto out = [&](double v) {
          return !(std::abs(std::round(v / cfg.offset_resolution)) <= cfg.center_bin());
        };
        if (out(d.x) || out(d.y)) {
          start = i + 1;
          break;
        }
      }
    }
    if (pos.size() - start < 2) continue;
    std::span<const Vec2> tail(pos.data() + start, pos.size() - start);
    inputs.push_back(make_path_input(cfg, tail));
  }
  return inputs;
}

void expand(GenSession &s, const ModelParams &model, NodeId node, std::size_t queue,
            std::vector<GenEvent> &out) {
  const auto &cfg = model.config;
  const Vec2 pos = s.graph.position(node);
  std::vector<PathInput> inputs;
  if (s.graph.degree(node) > 0) {
    auto L = static_cast<std::size_t>(cfg.max_path_len), M = static_cast<std::size_t>(cfg.max_paths);
    std::size_t k = std::min(count_incoming_paths(s.graph, node, L, M), M);
    inputs = encoder_inputs(s, cfg, sample_incoming_paths(s.graph, node, k, L, s.rng));
  }
  AttrInput attr = make_attr(cfg, s.style, s.attr_raster.get(), pos);
  VectorXd ctx;
  if (inputs.empty()) {
    ctx = VectorXd::Zero(cfg.context_size());
    if (cfg.attr_mode != AttrMode::None) ctx.tail(cfg.embed_size) = attribute_vector(model, attr);
  } else {
    ctx = encode(model, inputs, attr);
  }

  Decoder dec(model, ctx);
  Placer placer{s, out, queue};
  const double T = s.options.temperature;
  const int tries = T > 0.0 ? std::max(1, s.options.retries) : 1;
  const bool use_prior = s.prior.likelihood && s.prior.lambda != 0.0;
  const int B = cfg.bins();
  std::string reason = "truncated";
  std::vector<double> joint;
  for (std::size_t slot = 0; slot < s.options.max_decode_steps; ++slot) {
    StepLogits lg = dec.step();
    std::optional<RoadType> type;
    if (s.typed) {
      type = RoadType::Minor;
      if (lg.edge.size() == 2 && lg.edge(0) > lg.edge(1)) type = RoadType::Major;
    }
    int bx = cfg.center_bin(), by = cfg.center_bin();
    if (use_prior) {
      VectorXd px = softmax(T > 0.0 ? VectorXd(lg.x / T) : lg.x);
      VectorXd py = softmax(T > 0.0 ? VectorXd(lg.y / T) : lg.y);
      joint.assign(static_cast<std::size_t>(B) * B, 0.0);
      double best = -1.0, total = 0.0;
      std::size_t best_i = 0;
      for (int i = 0; i < B; ++i) {
        double dx = bin_to_offset(i, cfg);
        for (int j = 0; j < B; ++j) {
          double lik = s.prior.likelihood->sample(pos + Vec2{dx, bin_to_offset(j, cfg)});
          double v = px(i) * py(j) * std::pow(lik, s.prior.lambda);
          std::size_t idx = static_cast<std::size_t>(i) * B + j;
          joint[idx] = v;
          total += v;
          if (v > best) {
            best = v;
            best_i = idx;
          }
        }
      }
      double score = best / (px.maxCoeff() * py.maxCoeff());
      if (!(score >= s.prior.stop_threshold)) {
        reason = "low_confidence";
        break;
      }
      for (int attempt = 0; attempt < tries; ++attempt) {
        std::size_t idx = best_i;
        if (T > 0.0) {
          double u = std::uniform_real_distribution<double>(0.0, total)(s.rng), acc = 0.0;
          for (idx = 0; idx + 1 < joint.size(); ++idx) {
            acc += joint[idx];
            if (u < acc) break;
          }
        }
        bx = static_cast<int>(idx / B);
        by = static_cast<int>(idx % B);
        Vec2 cand = pos + Vec2{bin_to_offset(bx, cfg), bin_to_offset(by, cfg)};
        if (placer.place(node, cand, type) != Outcome::Rejected) break;
      }
    } else {
      for (int attempt = 0; attempt < tries; ++attempt) {
        bx = static_cast<int>(sample_categorical(lg.x, T, s.rng));
        by = static_cast<int>(sample_categorical(lg.y, T, s.rng));
        Vec2 cand = pos + Vec2{bin_to_offset(bx, cfg), bin_to_offset(by, cfg)};
        if (placer.place(node, cand, type) != Outcome::Rejected) break;
      }
    }
    dec.feed(bx, by);
    if (1.0 / (1.0 + std::exp(-lg.stop)) > 0.5) {
      reason = "stop";
      break;
    }
  }
  GenEvent fin{EventKind::NodeFinished, s.step, node};
  fin.reason = reason;
  out.push_back(fin);
}

GenSession make_session(const RoadGraph &g, std::optional<int> style, const Limits &limits,
                        std::uint64_t rng_seed, const GenOptions &opt) {
  if (g.empty()) throw std::invalid_argument("empty seed graph");
  GenSession s;
  s.graph = g;
  s.style = style;
  s.limits = limits;
  s.options = opt;
  s.rng = Rng(rng_seed);
  s.seed = rng_seed;
  s.region = opt.region ? *opt.region : g.bbox().expanded(opt.region_margin);
  s.max_edge = max_edge_length(g);
  s.typed = g.has_edge_types();
  for (const auto &[id, n] : g.nodes()) {
    GenEvent e{EventKind::NodeAdded, 0, id, -1, n.pos};
    s.events.push_back(e);
  }
  for (const auto &e : g.edges()) {
    GenEvent ev{EventKind::EdgeAdded, 0, e.a, e.b};
    ev.type = e.type;
    s.events.push_back(ev);
  }
  return s;
}

}  // namespace

GenSession init_session(const RoadGraph &seed_graph, std::optional<int> style, const Limits &limits,
                        std::uint64_t rng_seed, const GenOptions &opt) {
  GenSession s = make_session(seed_graph, style, limits, rng_seed, opt);
  for (const auto &comp : connected_components(seed_graph)) {
    s.queues.emplace_back(comp.begin(), comp.end());
    s.queued.insert(comp.begin(), comp.end());
  }
  // node_added events carry their queue index
  for (std::size_t q = 0; q < s.queues.size(); ++q)
    for (auto &e : s.events)
      if (e.kind == EventKind::NodeAdded &&
          std::find(s.queues[q].begin(), s.queues[q].end(), e.node) != s.queues[q].end())
        e.queue = static_cast<int>(q);
  return s;
}

GenSession init_session_with_queue(const RoadGraph &graph, const std::vector<NodeId> &queue_nodes,
                                   std::optional<int> style, const Limits &limits,
                                   std::uint64_t rng_seed, const GenOptions &opt) {
  GenSession s = make_session(graph, style, limits, rng_seed, opt);
  std::set<NodeId> wanted(queue_nodes.begin(), queue_nodes.end());
  for (NodeId id : wanted)
    if (!graph.has_node(id)) throw std::invalid_argument("queued node not in graph");
  for (const auto &comp : connected_components(graph)) {
    std::deque<NodeId> q;
    for (NodeId id : comp)
      if (wanted.contains(id)) q.push_back(id);
    if (q.empty()) continue;
    for (NodeId id : q) {
      s.queued.insert(id);
      for (auto &e : s.events)
        if (e.kind == EventKind::NodeAdded && e.node == id) e.queue = static_cast<int>(s.queues.size());
    }
    s.queues.push_back(std::move(q));
  }
  if (s.queues.empty()) s.status = SessionStatus::Exhausted;
  return s;
}

std::vector<GenEvent> step(GenSession &s, const ModelParams &model) {
  if (s.exhausted()) {
    s.status = SessionStatus::Exhausted;
    throw Exhausted();
  }
  const std::size_t Q = s.queues.size();
  std::size_t q = 0;
  for (std::size_t i = 0; i < Q; ++i) {
    q = (s.cursor + i) % Q;
    if (!s.queues[q].empty()) break;
  }
  s.cursor = (q + 1) % Q;
  NodeId node = s.queues[q].front();
  s.queues[q].pop_front();
  ++s.step;
  std::vector<GenEvent> out;
  expand(s, model, node, q, out);
  if (s.queues[q].empty()) {
    GenEvent e{EventKind::QueueExhausted, s.step};
    e.queue = static_cast<int>(q);
    out.push_back(e);
  }
  if (s.exhausted()) s.status = SessionStatus::Exhausted;
  s.events.insert(s.events.end(), out.begin(), out.end());
  return out;
}

RoadGraph generate(GenSession &s, const ModelParams &model, const Budget &budget) {
  const long start = s.step;
  while (true) {
    if (s.exhausted()) {
      s.status = SessionStatus::Exhausted;
      break;
    }
    if ((budget.max_steps && s.step - start >= *budget.max_steps) ||
        (budget.max_nodes && s.graph.node_count() >= *budget.max_nodes)) {
      s.status = SessionStatus::BudgetReached;
      break;
    }
    step(s, model);
  }
  return s.graph;
}

RoadGraph complete(const RoadGraph &g, const ModelParams &model, std::optional<int> style,
                   const Limits &limits, std::uint64_t rng_seed, const Budget &budget,
                   const GenOptions &opt) {
  std::vector<NodeId> ends;
  for (const auto &[id, n] : g.nodes())
    if (n.neighbors.size() == 1) ends.push_back(id);
  if (ends.empty()) return g;
  GenSession s = init_session_with_queue(g, ends, style, limits, rng_seed, opt);
  return generate(s, model, budget);
}

std::vector<std::pair<Edge, Edge>> crossing_edges(const RoadGraph &g) {
  std::vector<std::pair<Edge, Edge>> out;
  double max_edge = max_edge_length(g);
  for (const auto &e : g.edges()) {
    Vec2 pa = g.position(e.a), pb = g.position(e.b);
    Vec2 mid = (pa + pb) * 0.5;
    double radius = distance(pa, pb) / 2 + max_edge + 1e-6;
    std::set<std::pair<NodeId, NodeId>> seen;
    for (NodeId u : g.nodes_within(mid, radius)) {
      for (NodeId v : g.neighbors(u)) {
        std::pair<NodeId, NodeId> key = std::minmax(u, v);
        if (!seen.insert(key).second) continue;
        if (key <= std::pair(e.a, e.b)) continue;  // each pair once
        if (segment_conflict(g, e.a, pa, e.b, pb, key.first, key.second))
          out.push_back({e, Edge{key.first, key.second, g.edge_type(key.first, key.second)}});
      }
    }
  }
  return out;
}

std::vector<std::string> validate_generated(const RoadGraph &g, const Limits &limits,
                                            double angle_tolerance) {
  std::vector<std::string> problems = validate_invariants(g);
  for (const auto &[id, n] : g.nodes()) {
    LocalStats s = local_stats(g, id);
    if (s.degree > limits.max_degree)
      problems.push_back("node " + std::to_string(id) + " exceeds max degree");
    if (s.density[0] > limits.max_density)
      problems.push_back("node " + std::to_string(id) + " exceeds max density");
    if (s.degree >= 2 && s.min_angle < limits.min_angle - angle_tolerance)
      problems.push_back("node " + std::to_string(id) + " below min angle");
  }
  for (const auto &[a, b] : crossing_edges(g))
    problems.push_back("edges " + std::to_string(a.a) + "-" + std::to_string(a.b) + " and " +
                       std::to_string(b.a) + "-" + std::to_string(b.b) + " cross");
  return problems;
}

}  // namespace ntg
