#include "ntg/aerial.hpp"

#include <cmath>

#include "ntg/graph_ops.hpp"

namespace ntg {

VectorXd pooled_patch(const LikelihoodRaster &r, Vec2 center, int patch) {
  if (patch <= 0 || patch % 4 != 0) throw std::invalid_argument("patch size must be a positive multiple of 4");
  auto [fc, fr] = r.to_pixel(center);
  const auto c0 = static_cast<std::int64_t>(std::llround(fc)) - patch / 2;
  const auto r0 = static_cast<std::int64_t>(std::llround(fr)) - patch / 2;
  const int cells = patch / 4;
  VectorXd out = VectorXd::Zero(cells * cells);
  for (int by = 0; by < cells; ++by) {
    for (int bx = 0; bx < cells; ++bx) {
      double sum = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) {
          std::int64_t col = c0 + bx * 4 + dx, row = r0 + by * 4 + dy;
          if (r.inside(col, row)) sum += r.at(col, row);
        }
      out(by * cells + bx) = sum / 16.0;
    }
  }
  return out;
}

VectorXd raster_attr(const LikelihoodRaster &r, Vec2 center, const ModelParams &p) {
  if (p.config.attr_mode != AttrMode::Raster) throw std::invalid_argument("model has no raster attribute");
  AttrInput a;
  a.pooled = pooled_patch(r, center, p.config.patch_size);
  return attribute_vector(p, a);
}

AttrInput make_attr(const ModelConfig &cfg, std::optional<int> style, const LikelihoodRaster *raster,
                    Vec2 pos) {
  AttrInput a;
  if (cfg.attr_mode == AttrMode::Style) a.style = style;
  if (cfg.attr_mode == AttrMode::Raster) {
    if (!raster) throw std::invalid_argument("raster-attribute model needs a raster");
    a.pooled = pooled_patch(*raster, pos, cfg.patch_size);
  }
  return a;
}

double local_confidence(const LikelihoodRaster &r, Vec2 pos) {
  auto [fc, fr] = r.to_pixel(pos);
  const auto c = static_cast<std::int64_t>(std::llround(fc));
  const auto row = static_cast<std::int64_t>(std::llround(fr));
  double sum = 0.0;
  for (std::int64_t dy = -2; dy <= 2; ++dy)
    for (std::int64_t dx = -2; dx <= 2; ++dx)
      if (r.inside(c + dx, row + dy)) sum += r.at(c + dx, row + dy);
  return sum / 25.0;
}

namespace {

RoadGraph star(const RoadGraph &g, NodeId root, std::span<const NodeId> nbrs) {
  RoadGraph seed;
  seed.add_node(0, g.position(root));
  NodeId id = 1;
  for (NodeId n : nbrs) {
    seed.add_node(id, g.position(n));
    seed.add_edge(0, id);
    ++id;
  }
  return seed;
}

}  // namespace

RootSelection select_root(const LikelihoodRaster &r, const SkeletonOptions &opt) {
  validate_raster(r);
  RoadGraph skel;
  try {
    skel = graph_from_raster(r, opt);
  } catch (const DataError &) {
  }
  RootSelection sel;
  NodeId best = -1;
  for (const auto &[id, n] : skel.nodes()) {
    if (n.neighbors.size() < 3) continue;
    double s = local_confidence(r, n.pos);
    if (best < 0 || s > sel.score) {
      best = id;
      sel.score = s;
    }
  }
  if (best >= 0) {
    std::vector<NodeId> nbrs(skel.neighbors(best).begin(), skel.neighbors(best).end());
    sel.seed = star(skel, best, nbrs);
    sel.root = 0;
    return sel;
  }
  sel.fallback = true;
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < r.values.size(); ++i)
    if (r.values[i] > r.values[argmax]) argmax = i;
  Vec2 peak = r.pixel_center(static_cast<double>(argmax % r.width), static_cast<double>(argmax / r.width));
  sel.root = 0;
  if (skel.empty()) {
    sel.seed.add_node(0, peak);
  } else {
    NodeId near = skel.node_ids().front();
    for (NodeId id : skel.node_ids())
      if (distance(skel.position(id), peak) < distance(skel.position(near), peak)) near = id;
    std::vector<NodeId> nbrs;
    if (!skel.neighbors(near).empty()) nbrs.push_back(*skel.neighbors(near).begin());
    sel.seed = star(skel, near, nbrs);
  }
  sel.score = local_confidence(r, sel.seed.position(0));
  return sel;
}

RoadGraph parse_with_prior(const LikelihoodRaster &r, const ModelParams &model, const Limits &limits,
                           const ParseConfig &cfg, GenSession *session_out) {
  if (!(cfg.stop_threshold > 0.0 && cfg.stop_threshold < 1.0))
    throw std::invalid_argument("stop threshold must lie in (0, 1)");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  RootSelection sel = select_root(r, cfg.skeleton);
  RoadGraph seed = subdivide(sel.seed, model.config.offset_range);
  GenOptions opt = cfg.gen;
  opt.temperature = cfg.temperature;
  if (!opt.region) opt.region = r.extent();
  auto raster = std::make_shared<const LikelihoodRaster>(r);
  GenSession s = init_session(seed, std::nullopt, limits, cfg.seed, opt);
  s.prior = PriorOptions{raster, cfg.lambda, cfg.stop_threshold};
  if (model.config.attr_mode == AttrMode::Raster) s.attr_raster = raster;
  generate(s, model, cfg.budget);
  RoadGraph out = s.graph;
  if (session_out) *session_out = std::move(s);
  return out;
}

}  // namespace ntg
