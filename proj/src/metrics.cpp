#include "ntg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "ntg/graph_ops.hpp"

namespace ntg {

std::unordered_map<NodeId, double> network_distances(const RoadGraph &g, NodeId source,
                                                     double cutoff) {
  if (!g.has_node(source)) throw std::invalid_argument("unknown source node");
  std::unordered_map<NodeId, double> dist;
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, source});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (dist.contains(u)) continue;
    dist.emplace(u, d);
    Vec2 pu = g.position(u);
    for (NodeId v : g.neighbors(u)) {
      if (dist.contains(v)) continue;
      double nd = d + distance(pu, g.position(v));
      if (nd <= cutoff) pq.push({nd, v});
    }
  }
  return dist;
}

double reach_within(const RoadGraph &g, const std::unordered_map<NodeId, double> &dist,
                    double radius) {
  auto left = [&](NodeId n) {
    auto it = dist.find(n);
    return it == dist.end() ? 0.0 : std::max(0.0, radius - it->second);
  };
  double total = 0.0;
  for (const auto &[u, du] : dist) {
    if (du >= radius) continue;
    for (NodeId v : g.neighbors(u)) {
      double rv = left(v);
      if (rv > 0.0 && v < u) continue;  // counted from v
      total += std::min(g.edge_length(u, v), (radius - du) + rv);
    }
  }
  return total;
}

std::optional<Eigen::Matrix<double, 8, 1>> UrbanFeatures::vector() const {
  if (!convenience) return std::nullopt;
  Eigen::Matrix<double, 8, 1> v;
  v << density[0], density[1], density[2], connectivity, reach[0], reach[1], reach[2],
      *convenience;
  return v;
}

UrbanFeatures urban_features(const RoadGraph &g, NodeId node, Rng &rng,
                             const ConvenienceOptions &opt) {
  UrbanFeatures f;
  Vec2 p = g.position(node);
  for (std::size_t i = 0; i < kDensityRadii.size(); ++i)
    f.density[i] = static_cast<double>(g.count_within(p, kDensityRadii[i]));
  f.connectivity = static_cast<double>(g.degree(node));
  auto dist = network_distances(g, node);
  for (std::size_t i = 0; i < kReachRadii.size(); ++i) f.reach[i] = reach_within(g, dist, kReachRadii[i]);

  std::vector<NodeId> candidates;
  for (const auto &[id, n] : g.nodes()) {
    auto it = dist.find(id);
    if (it != dist.end() && it->second > 0.0 && distance(p, n.pos) > opt.min_separation)
      candidates.push_back(id);
  }
  if (!candidates.empty() && opt.partners > 0) {
    std::vector<NodeId> chosen;
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen), opt.partners, rng);
    double sum = 0.0;
    for (NodeId id : chosen) sum += distance(p, g.position(id)) / dist.at(id);
    f.convenience = sum / static_cast<double>(chosen.size());
  }
  return f;
}

std::vector<UrbanFeatures> urban_features_all(const RoadGraph &g, std::uint64_t seed,
                                              const ConvenienceOptions &opt) {
  Rng rng(seed);
  std::vector<UrbanFeatures> out;
  out.reserve(g.node_count());
  for (const auto &[id, n] : g.nodes()) out.push_back(urban_features(g, id, rng, opt));
  return out;
}

FeatureStats feature_stats(const std::vector<Eigen::VectorXd> &samples) {
  if (samples.size() < 2) throw std::invalid_argument("feature statistics need at least two samples");
  const auto dim = samples.front().size();
  FeatureStats s;
  s.count = samples.size();
  s.mean = Eigen::VectorXd::Zero(dim);
  for (const auto &v : samples) {
    if (v.size() != dim) throw std::invalid_argument("feature dimension mismatch");
    s.mean += v;
  }
  s.mean /= static_cast<double>(s.count);
  s.cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto &v : samples) {
    Eigen::VectorXd d = v - s.mean;
    s.cov += d * d.transpose();
  }
  s.cov /= static_cast<double>(s.count - 1);
  return s;
}

FeatureStats urban_feature_stats(const std::vector<RoadGraph> &graphs, std::uint64_t seed,
                                 const ConvenienceOptions &opt) {
  std::vector<Eigen::VectorXd> samples;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    for (const auto &f : urban_features_all(graphs[i], seed + 0x9e3779b97f4a7c15ULL * i, opt))
      if (auto v = f.vector()) samples.emplace_back(*v);
  }
  return feature_stats(samples);
}

namespace {

void check_symmetric(const Eigen::MatrixXd &m) {
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("covariance is not symmetric");
}

// eigenvalues at rounding-noise level count as zero
Eigen::VectorXd clamped(const Eigen::VectorXd &ev) {
  double tol = 1e-13 * static_cast<double>(ev.size()) * std::max(1.0, ev.cwiseAbs().maxCoeff());
  return ev.unaryExpr([tol](double v) { return v > tol ? v : 0.0; });
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = clamped(es.eigenvalues()).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats &a, const FeatureStats &b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != a.mean.size() ||
      b.cov.rows() != b.mean.size() || a.cov.cols() != a.cov.rows() || b.cov.cols() != b.cov.rows())
    throw std::invalid_argument("feature statistics dimension mismatch");
  check_symmetric(a.cov);
  check_symmetric(b.cov);
  // tr((sa B sa)^(1/2)) is the nuclear norm of sa * sb
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(psd_sqrt(a.cov) * psd_sqrt(b.cov));
  double tr_sqrt = svd.singularValues().sum();
  double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

namespace {

struct Segment {
  NodeId a, b;
  Vec2 pa, pb;
};

/// Uniform grid over segment bounding boxes.
class SegmentIndex {
 public:
  SegmentIndex(const RoadGraph &g, double cell) : cell_(cell) {
    for (const auto &e : g.edges()) add({e.a, e.b, g.position(e.a), g.position(e.b)});
    for (const auto &[id, n] : g.nodes())
      if (n.neighbors.empty()) add({id, id, n.pos, n.pos});
  }

  template <class Fn>
  void for_each_candidate(Vec2 p, double radius, Fn &&fn) const {
    auto [x0, y0] = cell_of({p.x - radius, p.y - radius});
    auto [x1, y1] = cell_of({p.x + radius, p.y + radius});
    ++stamp_;
    for (auto cx = x0; cx <= x1; ++cx)
      for (auto cy = y0; cy <= y1; ++cy) {
        auto it = cells_.find({cx, cy});
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second) {
          if (seen_[i] == stamp_) continue;
          seen_[i] = stamp_;
          fn(segments_[i]);
        }
      }
  }

  const std::vector<Segment> &segments() const { return segments_; }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(Vec2 p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cell_)),
            static_cast<std::int64_t>(std::floor(p.y / cell_))};
  }
  void add(const Segment &s) {
    std::size_t i = segments_.size();
    segments_.push_back(s);
    seen_.push_back(0);
    auto [x0, y0] = cell_of({std::min(s.pa.x, s.pb.x), std::min(s.pa.y, s.pb.y)});
    auto [x1, y1] = cell_of({std::max(s.pa.x, s.pb.x), std::max(s.pa.y, s.pb.y)});
    for (auto cx = x0; cx <= x1; ++cx)
      for (auto cy = y0; cy <= y1; ++cy) cells_[{cx, cy}].push_back(i);
  }

  double cell_;
  std::vector<Segment> segments_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> cells_;
  mutable std::vector<std::uint64_t> seen_;
  mutable std::uint64_t stamp_ = 0;
};

std::optional<RoadPoint> closest(const SegmentIndex &idx, Vec2 p, double radius) {
  std::optional<RoadPoint> best;
  idx.for_each_candidate(p, radius, [&](const Segment &s) {
    double t = project_param(p, s.pa, s.pb);
    Vec2 q = s.pa + (s.pb - s.pa) * t;
    double d = distance(p, q);
    if (d > radius) return;
    if (!best || std::tie(d, s.a, s.b) < std::tie(best->dist, best->a, best->b))
      best = RoadPoint{s.a, s.b, t, q, d};
  });
  return best;
}

bool within(const SegmentIndex &idx, Vec2 p, double radius) {
  bool hit = false;
  idx.for_each_candidate(p, radius, [&](const Segment &s) {
    if (!hit && point_segment_distance(p, s.pa, s.pb) <= radius) hit = true;
  });
  return hit;
}

std::vector<Vec2> sample_points(const RoadGraph &g, double step) {
  std::vector<Vec2> pts;
  for (const auto &e : g.edges()) {
    Vec2 a = g.position(e.a), b = g.position(e.b);
    auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(distance(a, b) / step)));
    for (std::size_t i = 0; i <= n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / n));
  }
  for (const auto &[id, n] : g.nodes())
    if (n.neighbors.empty()) pts.push_back(n.pos);
  return pts;
}

}  // namespace

std::optional<RoadPoint> closest_road_point(const RoadGraph &g, Vec2 p, double radius) {
  return closest(SegmentIndex(g, std::max(radius, 1.0) * 4.0), p, radius);
}

double directed_outside_fraction(const RoadGraph &from, const RoadGraph &to,
                                 const DiversityOptions &opt) {
  if (from.empty() || to.empty()) throw std::invalid_argument("diversity needs non-empty graphs");
  if (!(opt.step > 0.0) || !(opt.radius > 0.0)) throw std::invalid_argument("bad diversity options");
  SegmentIndex idx(to, opt.radius * 2.0);
  auto pts = sample_points(from, opt.step);
  std::size_t outside = 0;
  for (Vec2 p : pts) outside += !within(idx, p, opt.radius);
  return static_cast<double>(outside) / static_cast<double>(pts.size());
}

double diversity(const RoadGraph &g1, const RoadGraph &g2, const DiversityOptions &opt) {
  return 50.0 * (directed_outside_fraction(g1, g2, opt) + directed_outside_fraction(g2, g1, opt));
}

namespace {

/// Target graph with every snapped source node inserted as an on-road node.
struct SnappedTarget {
  RoadGraph graph;
  std::unordered_map<NodeId, NodeId> node_of;  // source node -> node in graph
};

SnappedTarget snap_into(const RoadGraph &source, const RoadGraph &target, double buffer) {
  SnappedTarget out{target, {}};
  SegmentIndex idx(target, std::max(buffer, 1.0) * 4.0);
  std::map<std::pair<NodeId, NodeId>, std::vector<std::pair<double, NodeId>>> on_edge;
  for (const auto &[id, n] : source.nodes()) {
    auto rp = closest(idx, n.pos, buffer);
    if (!rp) continue;
    if (rp->a == rp->b || rp->t == 0.0) {
      out.node_of[id] = rp->a;
    } else if (rp->t == 1.0) {
      out.node_of[id] = rp->b;
    } else {
      on_edge[{rp->a, rp->b}].push_back({rp->t, id});
    }
  }
  NodeId next = out.graph.next_id();
  for (auto &[key, items] : on_edge) {
    auto [a, b] = key;
    std::sort(items.begin(), items.end());
    Vec2 pa = target.position(a), pb = target.position(b);
    out.graph.remove_edge(a, b);
    NodeId prev = a;
    double prev_t = -1.0;
    for (auto [t, src] : items) {
      if (t != prev_t) {
        out.graph.add_node(next, pa + (pb - pa) * t);
        out.graph.add_edge(prev, next);
        prev = next++;
        prev_t = t;
      }
      out.node_of[src] = prev;
    }
    out.graph.add_edge(prev, b);
  }
  return out;
}

}  // namespace

double apls_directed(const RoadGraph &source, const RoadGraph &target, const AplsOptions &opt,
                     std::size_t *pairs) {
  if (source.node_count() < 2 || target.node_count() < 2)
    throw std::invalid_argument("apls needs graphs with at least two nodes");
  SnappedTarget snapped = snap_into(source, target, opt.buffer);
  std::vector<NodeId> ids = source.node_ids();

  std::map<NodeId, std::vector<NodeId>> wanted;
  bool exhaustive = ids.size() <= opt.exhaustive_max_nodes;
  if (!exhaustive) {
    Rng rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    for (std::size_t k = 0; k < opt.sampled_pairs; ++k) {
      std::size_t i = pick(rng), j = pick(rng);
      while (j == i) j = pick(rng);
      wanted[ids[i]].push_back(ids[j]);
    }
  }

  double sum = 0.0;
  std::size_t n = 0;
  for (NodeId v1 : ids) {
    if (!exhaustive && !wanted.contains(v1)) continue;
    auto ds = network_distances(source, v1);
    std::unordered_map<NodeId, double> dt;
    auto s1 = snapped.node_of.find(v1);
    if (s1 != snapped.node_of.end()) dt = network_distances(snapped.graph, s1->second);
    auto visit = [&](NodeId v2) {
      if (v2 == v1) return;
      auto it = ds.find(v2);
      if (it == ds.end() || !(it->second > 0.0)) return;
      double p = it->second, c = 1.0;
      auto s2 = snapped.node_of.find(v2);
      if (s1 != snapped.node_of.end() && s2 != snapped.node_of.end()) {
        auto jt = dt.find(s2->second);
        if (jt != dt.end()) c = std::min(1.0, std::abs(p - jt->second) / p);
      }
      sum += c;
      ++n;
    };
    if (exhaustive) {
      for (NodeId v2 : ids) visit(v2);
    } else {
      for (NodeId v2 : wanted.at(v1)) visit(v2);
    }
  }
  if (pairs) *pairs = n;
  return n == 0 ? 0.0 : 1.0 - sum / static_cast<double>(n);
}

AplsResult apls_report(const RoadGraph &source, const RoadGraph &target, const AplsOptions &opt) {
  if (source.node_count() < 2 || target.node_count() < 2)
    throw std::invalid_argument("apls needs graphs with at least two nodes");
  RoadGraph s = subdivide(rdp_simplify(source, opt.simplify_tolerance), opt.subdivide_length);
  RoadGraph t = subdivide(rdp_simplify(target, opt.simplify_tolerance), opt.subdivide_length);
  AplsResult r;
  AplsOptions back = opt;
  back.seed = opt.seed ^ 0xa5a5a5a5a5a5a5a5ULL;
  r.forward = apls_directed(s, t, opt, &r.forward_pairs);
  r.backward = apls_directed(t, s, back, &r.backward_pairs);
  r.score = 0.5 * (r.forward + r.backward);
  return r;
}

double apls(const RoadGraph &source, const RoadGraph &target, const AplsOptions &opt) {
  return apls_report(source, target, opt).score;
}

std::size_t BinaryRaster::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

BinaryRaster rasterize(const RoadGraph &g, const BBox &bbox, double resolution,
                       double half_width_px) {
  if (bbox.empty() || !(resolution > 0.0) || !(half_width_px >= 0.0))
    throw std::invalid_argument("bad rasterization geometry");
  BinaryRaster r;
  r.width = static_cast<std::uint32_t>(std::max(1.0, std::ceil(bbox.width() / resolution)));
  r.height = static_cast<std::uint32_t>(std::max(1.0, std::ceil(bbox.height() / resolution)));
  r.min_x = bbox.min_x;
  r.max_y = bbox.max_y;
  r.resolution = resolution;
  r.values.assign(static_cast<std::size_t>(r.width) * r.height, 0);
  const double hw = half_width_px * resolution;
  auto draw = [&](Vec2 a, Vec2 b) {
    auto col_of = [&](double x) { return (x - r.min_x) / resolution - 0.5; };
    auto row_of = [&](double y) { return (r.max_y - y) / resolution - 0.5; };
    auto c0 = static_cast<std::int64_t>(std::floor(col_of(std::min(a.x, b.x) - hw)));
    auto c1 = static_cast<std::int64_t>(std::ceil(col_of(std::max(a.x, b.x) + hw)));
    auto r0 = static_cast<std::int64_t>(std::floor(row_of(std::max(a.y, b.y) + hw)));
    auto r1 = static_cast<std::int64_t>(std::ceil(row_of(std::min(a.y, b.y) - hw)));
    c0 = std::max<std::int64_t>(c0, 0);
    r0 = std::max<std::int64_t>(r0, 0);
    c1 = std::min<std::int64_t>(c1, r.width - 1);
    r1 = std::min<std::int64_t>(r1, r.height - 1);
    for (auto row = r0; row <= r1; ++row)
      for (auto col = c0; col <= c1; ++col) {
        auto &v = r.values[static_cast<std::size_t>(row) * r.width + static_cast<std::size_t>(col)];
        if (!v && point_segment_distance(r.pixel_center(col, row), a, b) <= hw) v = 1;
      }
  };
  for (const auto &e : g.edges()) draw(g.position(e.a), g.position(e.b));
  for (const auto &[id, n] : g.nodes())
    if (n.neighbors.empty()) draw(n.pos, n.pos);
  return r;
}

IouF1 iou_f1(const BinaryRaster &pred, const BinaryRaster &gt) {
  if (!pred.same_geometry(gt) || pred.values.size() != gt.values.size())
    throw std::invalid_argument("raster geometry mismatch");
  std::size_t inter = 0, uni = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    bool p = pred.values[i], g = gt.values[i];
    inter += p && g;
    uni += p || g;
    np += p;
    ng += g;
  }
  if (uni == 0) return {1.0, 1.0};
  IouF1 out;
  out.iou = static_cast<double>(inter) / static_cast<double>(uni);
  out.f1 = 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
  return out;
}

}  // namespace ntg
