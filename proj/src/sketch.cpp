#include "ntg/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ntg/graph_ops.hpp"

namespace ntg {

namespace {

double mm(double v) { return std::round(v * 1000.0) / 1000.0; }
Vec2 mm(Vec2 p) { return {mm(p.x), mm(p.y)}; }

std::vector<double> arms(int n, double offset = 0.0) {
  std::vector<double> h;
  for (int i = 0; i < n; ++i) h.push_back(offset + kTwoPi * i / n);
  return h;
}

}  // namespace

const std::vector<NodeTemplate> &node_templates() {
  static const std::vector<NodeTemplate> t{
      {"stub", {0.0}},
      {"straight", {0.0, kPi}},
      {"tee", {0.0, kPi / 2, kPi}},
      {"wye", arms(3, kPi / 2)},
      {"plus", arms(4)},
      {"star5", arms(5)},
  };
  return t;
}

const NodeTemplate &find_template(const std::string &name) {
  for (const auto &t : node_templates())
    if (t.name == name) return t;
  throw std::invalid_argument("unknown template: " + name);
}

RoadGraph template_graph(const NodeTemplate &t, Vec2 center, double arm, double rotation) {
  if (!(arm > 0.0)) throw std::invalid_argument("template arm must be positive");
  RoadGraph g;
  g.add_node(0, mm(center));
  NodeId id = 1;
  for (double h : t.headings) {
    g.add_node(id, mm(center + Vec2{std::cos(h + rotation), std::sin(h + rotation)} * arm));
    g.add_edge(0, id++);
  }
  return g;
}

RoadGraph random_template_seed(Rng &rng, Vec2 center, double arm_min, double arm_max) {
  const auto &ts = node_templates();
  std::uniform_int_distribution<std::size_t> pick(0, ts.size() - 1);
  std::uniform_real_distribution<double> rot(0.0, kTwoPi), len(arm_min, arm_max);
  const NodeTemplate &t = ts[pick(rng)];
  double r = rot(rng);
  return template_graph(t, center, len(rng), r);
}

std::optional<TemplateMatch> match_junction(const RoadGraph &g, NodeId node) {
  Vec2 c = g.position(node);
  std::vector<double> h;
  for (NodeId n : g.neighbors(node)) h.push_back(heading(g.position(n) - c));
  std::sort(h.begin(), h.end());
  const std::size_t d = h.size();
  std::optional<TemplateMatch> best;
  for (const auto &t : node_templates()) {
    if (t.headings.size() != d || d == 0) continue;
    std::vector<double> th = t.headings;
    for (double &x : th) x = heading({std::cos(x), std::sin(x)});
    std::sort(th.begin(), th.end());
    for (std::size_t s = 0; s < d; ++s) {
      double sx = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double diff = h[(i + s) % d] - th[i];
        sx += std::cos(diff);
        sy += std::sin(diff);
      }
      double rot = std::atan2(sy, sx);
      double res = 0.0;
      for (std::size_t i = 0; i < d; ++i) res += std::abs(wrap_angle(h[(i + s) % d] - th[i] - rot));
      res /= static_cast<double>(d);
      if (!best || res < best->residual - 1e-12)
        best = TemplateMatch{node, t.name, heading({std::cos(rot), std::sin(rot)}), res};
    }
  }
  return best;
}

namespace {

using Stroke = std::vector<Vec2>;

double stroke_length(const Stroke &s) {
  double l = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) l += distance(s[i - 1], s[i]);
  return l;
}

std::vector<double> arc_positions(const Stroke &s) {
  std::vector<double> a{0.0};
  for (std::size_t i = 1; i < s.size(); ++i) a.push_back(a.back() + distance(s[i - 1], s[i]));
  return a;
}

void snap_endpoints(std::vector<Stroke> &strokes, const SketchOptions &opt) {
  for (std::size_t i = 0; i < strokes.size(); ++i) {
    for (bool last : {false, true}) {
      Stroke &own = strokes[i];
      std::size_t ei = last ? own.size() - 1 : 0;
      Vec2 e = own[ei];
      auto arc = arc_positions(own);
      double best_d = opt.eps;
      std::optional<Vec2> target;
      for (std::size_t j = 0; j < strokes.size(); ++j) {
        const Stroke &s = strokes[j];
        for (std::size_t k = 0; k + 1 < s.size(); ++k) {
          if (j == i) {
            double lo = arc[k], hi = arc[k + 1];
            double gap = last ? arc[ei] - hi : lo;
            if (gap <= 2.0 * opt.eps) continue;
          }
          double t = project_param(e, s[k], s[k + 1]);
          Vec2 q = s[k] + (s[k + 1] - s[k]) * t;
          double d = distance(e, q);
          if (d < best_d || (d == best_d && !target)) {
            best_d = d;
            if (distance(q, s[k]) <= opt.resolution / 2) q = s[k];
            else if (distance(q, s[k + 1]) <= opt.resolution / 2) q = s[k + 1];
            target = q;
          }
        }
      }
      if (target) own[ei] = *target;
    }
  }
}

}  // namespace

SketchSeed match_template(const std::vector<std::vector<Vec2>> &input, const SketchOptions &opt) {
  if (!(opt.resolution > 0.0) || !(opt.eps >= 0.0) || !(opt.max_edge > 0.0))
    throw std::invalid_argument("bad sketch options");
  SketchSeed out;
  std::vector<Stroke> strokes;
  for (std::size_t i = 0; i < input.size(); ++i) {
    Stroke s;
    for (Vec2 p : input[i]) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("stroke has a non-finite point");
      Vec2 q{std::round(p.x / opt.resolution) * opt.resolution, std::round(p.y / opt.resolution) * opt.resolution};
      if (s.empty() || !(s.back() == q)) s.push_back(q);
    }
    if (s.size() < 2 || stroke_length(s) < opt.resolution) {
      out.warnings.push_back("stroke " + std::to_string(i) + " dropped: shorter than the resolution");
      continue;
    }
    strokes.push_back(std::move(s));
  }
  if (strokes.empty()) throw DataError("sketch has no usable stroke");
  snap_endpoints(strokes, opt);

  struct Seg {
    std::size_t stroke, k;
    Vec2 a, b;
  };
  std::vector<Seg> segs;
  for (std::size_t i = 0; i < strokes.size(); ++i)
    for (std::size_t k = 0; k + 1 < strokes[i].size(); ++k)
      segs.push_back({i, k, strokes[i][k], strokes[i][k + 1]});
  std::vector<std::vector<double>> splits(segs.size());
  for (std::size_t p = 0; p < segs.size(); ++p) {
    for (std::size_t q = p + 1; q < segs.size(); ++q) {
      const Seg &s1 = segs[p], &s2 = segs[q];
      if (s1.stroke == s2.stroke && s2.k == s1.k + 1) continue;
      if (!segments_intersect(s1.a, s1.b, s2.a, s2.b)) continue;
      Vec2 r = s1.b - s1.a, s = s2.b - s2.a;
      double den = r.cross(s);
      if (std::abs(den) > 1e-12 * r.norm() * s.norm()) {
        splits[p].push_back(std::clamp((s2.a - s1.a).cross(s) / den, 0.0, 1.0));
        splits[q].push_back(std::clamp((s2.a - s1.a).cross(r) / den, 0.0, 1.0));
      } else {
        for (Vec2 x : {s2.a, s2.b})
          if (point_segment_distance(x, s1.a, s1.b) < 1e-9) splits[p].push_back(project_param(x, s1.a, s1.b));
        for (Vec2 x : {s1.a, s1.b})
          if (point_segment_distance(x, s2.a, s2.b) < 1e-9) splits[q].push_back(project_param(x, s2.a, s2.b));
      }
    }
  }

  RoadGraph g;
  auto node_for = [&g](Vec2 p) {
    if (auto n = g.nearest_within(p, kMergeTolerance)) return *n;
    return g.add_node(p);
  };
  std::optional<NodeId> prev;
  std::size_t stroke = segs.front().stroke;
  auto link = [&](Vec2 p) {
    NodeId n = node_for(p);
    if (prev && *prev != n) g.add_edge(*prev, n);
    prev = n;
  };
  for (std::size_t p = 0; p < segs.size(); ++p) {
    const Seg &s = segs[p];
    if (s.stroke != stroke) {
      prev.reset();
      stroke = s.stroke;
    }
    link(s.a);
    std::sort(splits[p].begin(), splits[p].end());
    for (double t : splits[p]) link(s.a + (s.b - s.a) * t);
    link(s.b);
  }

  RoadGraph simple = subdivide(rdp_simplify(g, opt.resolution), opt.max_edge);
  RoadGraph seed;
  for (const auto &[id, n] : simple.nodes()) seed.add_node(id, mm(n.pos));
  for (const auto &e : simple.edges()) seed.add_edge(e.a, e.b);
  out.graph = renumbered(seed);
  for (const auto &[id, n] : out.graph.nodes())
    if (n.neighbors.size() >= 3)
      if (auto m = match_junction(out.graph, id)) out.junctions.push_back(*m);
  return out;
}

}  // namespace ntg
