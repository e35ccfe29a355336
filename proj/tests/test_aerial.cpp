#include <gtest/gtest.h>

#include <cmath>

#include "net_fixtures.hpp"
#include "ntg/aerial.hpp"
#include "ntg/graph_io.hpp"
#include "ntg/graph_ops.hpp"
#include "support.hpp"

using namespace ntg;
using namespace ntg::testing;

namespace {

RoadGraph plus_graph(Vec2 c, double arm) {
  RoadGraph g;
  g.add_node(0, c);
  g.add_node(1, c + Vec2{arm, 0});
  g.add_node(2, c + Vec2{0, arm});
  g.add_node(3, c + Vec2{-arm, 0});
  g.add_node(4, c + Vec2{0, -arm});
  for (NodeId i = 1; i <= 4; ++i) g.add_edge(0, i);
  return g;
}

LikelihoodRaster constant_raster(std::uint32_t w, std::uint32_t h, float v) {
  return LikelihoodRaster{w, h, 0.5, h - 0.5, 1.0, std::vector<float>(static_cast<std::size_t>(w) * h, v)};
}

ModelParams zero_model(AttrMode attr = AttrMode::None) {
  return ModelParams::zeros(tiny_config(EncoderMode::DiscreteCartesian, attr, false, 4, 100.0));
}

RoadGraph stripe_graph() {
  RoadGraph g;
  g.add_node(0, {10, 100});
  g.add_node(1, {390, 100});
  g.add_edge(0, 1);
  return g;
}

}  // namespace

TEST(PooledPatch, ConstantAndZeroPadding) {
  LikelihoodRaster r = constant_raster(64, 64, 1.0f);
  VectorXd inside = pooled_patch(r, {32, 32}, 16);
  ASSERT_EQ(inside.size(), 16);
  EXPECT_TRUE(inside.isApproxToConstant(1.0));
  // centred on the top-left pixel: only the lower-right quarter overlaps
  VectorXd corner = pooled_patch(r, r.pixel_center(0, 0), 16);
  for (int by = 0; by < 4; ++by)
    for (int bx = 0; bx < 4; ++bx) EXPECT_DOUBLE_EQ(corner(by * 4 + bx), (bx >= 2 && by >= 2) ? 1.0 : 0.0);
  EXPECT_TRUE(pooled_patch(constant_raster(8, 8, 0.0f), {4, 4}, 8).isZero());
  EXPECT_THROW(pooled_patch(r, {0, 0}, 6), std::invalid_argument);
}

TEST(PooledPatch, MatchesDirectBlockMeans) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0, 1);
  LikelihoodRaster r = constant_raster(30, 20, 0.0f);
  for (auto &v : r.values) v = u(rng);
  Vec2 c = r.pixel_center(11, 7);
  VectorXd p = pooled_patch(r, c, 8);
  for (int by = 0; by < 2; ++by)
    for (int bx = 0; bx < 2; ++bx) {
      double s = 0;
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) s += r.at(11 - 4 + bx * 4 + x, 7 - 4 + by * 4 + y);
      EXPECT_NEAR(p(by * 2 + bx), s / 16, 1e-12);
    }
}

TEST(RasterAttr, ZeroRasterGivesBiasAndEqualPatchesGiveEqualVectors) {
  ModelConfig c = tiny_config(EncoderMode::DiscreteCartesian, AttrMode::Raster, false);
  ModelParams p = random_params(c, 3, 1.0);
  VectorXd bias = p.tensors.attr_b.col(0);
  EXPECT_TRUE(raster_attr(constant_raster(32, 32, 0.0f), {16, 16}, p).isApprox(bias));
  // period-8 stripes: positions 8 px apart see identical patches
  LikelihoodRaster r = constant_raster(64, 64, 0.0f);
  for (std::uint32_t row = 0; row < 64; ++row)
    for (std::uint32_t col = 0; col < 64; ++col) r.at(col, row) = (col % 8) < 3 ? 0.75f : 0.1f;
  VectorXd a = raster_attr(r, r.pixel_center(20, 30), p), b = raster_attr(r, r.pixel_center(28, 30), p);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.isApprox(bias));
  EXPECT_THROW(raster_attr(r, {0, 0}, zero_model()), std::invalid_argument);
}

TEST(LocalConfidence, FiveByFiveMean) {
  LikelihoodRaster r = constant_raster(10, 10, 0.0f);
  r.at(5, 5) = 1.0f;
  r.at(7, 7) = 0.5f;
  r.at(8, 8) = 1.0f;
  EXPECT_DOUBLE_EQ(local_confidence(r, r.pixel_center(5, 5)), 1.5 / 25);
  EXPECT_DOUBLE_EQ(local_confidence(r, r.pixel_center(0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(local_confidence(constant_raster(3, 3, 1.0f), {1.5, 1.5}), 9.0 / 25);
}

TEST(SelectRoot, PlusPicksCenter) {
  RoadGraph g = plus_graph({100, 100}, 70);
  LikelihoodRaster r = render_likelihood(g, {0, 0, 200, 200}, 1.0, 4.0);
  RootSelection s = select_root(r);
  EXPECT_FALSE(s.fallback);
  EXPECT_NEAR(s.seed.position(s.root).x, 100, 2);
  EXPECT_NEAR(s.seed.position(s.root).y, 100, 2);
  EXPECT_EQ(s.seed.degree(s.root), 4u);
  EXPECT_EQ(s.seed.node_count(), 5u);
}

TEST(SelectRoot, BrighterJunctionWinsAndMatchesExhaustiveScoring) {
  RoadGraph a = plus_graph({80, 100}, 50), b = plus_graph({260, 100}, 50);
  BBox box{0, 0, 340, 200};
  LikelihoodRaster ra = render_likelihood(a, box, 1.0, 4.0), rb = render_likelihood(b, box, 1.0, 4.0);
  for (int dim : {0, 1}) {
    LikelihoodRaster r = ra;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      float va = ra.values[i] * (dim == 0 ? 0.5f : 1.0f), vb = rb.values[i] * (dim == 1 ? 0.5f : 1.0f);
      r.values[i] = std::max(va, vb);
    }
    SkeletonOptions opt;
    opt.threshold = 0.2;
    RootSelection s = select_root(r, opt);
    double expect_x = dim == 0 ? 260 : 80;
    EXPECT_NEAR(s.seed.position(s.root).x, expect_x, 2);
    // brute force over every junction of the skeleton
    RoadGraph skel = graph_from_raster(r, opt);
    double best = -1;
    Vec2 best_pos;
    for (const auto &[id, n] : skel.nodes()) {
      if (n.neighbors.size() < 3) continue;
      double sum = 0;
      auto [fc, fr] = r.to_pixel(n.pos);
      long c = std::lround(fc), row = std::lround(fr);
      for (long dy = -2; dy <= 2; ++dy)
        for (long dx = -2; dx <= 2; ++dx)
          if (r.inside(c + dx, row + dy)) sum += r.at(c + dx, row + dy);
      if (sum / 25 > best) {
        best = sum / 25;
        best_pos = n.pos;
      }
    }
    EXPECT_EQ(s.seed.position(s.root), best_pos);
    EXPECT_DOUBLE_EQ(s.score, best);
  }
}

TEST(SelectRoot, FallbacksWithoutJunction) {
  LikelihoodRaster r = render_likelihood(stripe_graph(), {0, 0, 400, 200}, 1.0, 4.0);
  RootSelection s = select_root(r);
  EXPECT_TRUE(s.fallback);
  EXPECT_EQ(s.seed.node_count(), 2u);
  EXPECT_EQ(s.seed.edge_count(), 1u);
  RootSelection z = select_root(constant_raster(20, 20, 0.0f));
  EXPECT_TRUE(z.fallback);
  EXPECT_EQ(z.seed.node_count(), 1u);
  EXPECT_EQ(z.score, 0.0);
}

TEST(BoxFilter, MatchesDirectWindowMeans) {
  LikelihoodRaster r = render_likelihood(plus_graph({30, 20}, 15), {0, 0, 47, 33}, 1.0, 3.0, 11, 0.2);
  for (int k : {0, 1, 3}) {
    LikelihoodRaster f = box_filter(r, k);
    for (long y = 0; y < static_cast<long>(r.height); ++y)
      for (long x = 0; x < static_cast<long>(r.width); ++x) {
        double s = 0.0;
        int n = 0;
        for (long yy = y - k; yy <= y + k; ++yy)
          for (long xx = x - k; xx <= x + k; ++xx) {
            if (xx < 0 || yy < 0 || xx >= static_cast<long>(r.width) || yy >= static_cast<long>(r.height)) continue;
            s += r.values[yy * r.width + xx];
            ++n;
          }
        ASSERT_NEAR(f.values[y * r.width + x], s / n, 1e-6);
      }
  }
  EXPECT_THROW(box_filter(r, -1), std::invalid_argument);
}

TEST(SelectRoot, SmoothingKeepsNoisyJunctionsCompact) {
  RoadGraph truth = make_grid(6, 6, 100.0);
  for (std::uint64_t seed : {7, 8, 9}) {
    LikelihoodRaster r = render_likelihood(truth, truth.bbox().expanded(50), 1.0, 4.0, seed, 0.1);
    SkeletonOptions opt;
    opt.smooth_radius = 1;
    RootSelection s = select_root(r, opt);
    ASSERT_FALSE(s.fallback);
    Vec2 c = s.seed.position(0);
    EXPECT_LE(std::abs(std::remainder(c.x, 100.0)), 1.5);
    EXPECT_LE(std::abs(std::remainder(c.y, 100.0)), 1.5);
    for (NodeId n : s.seed.neighbors(0)) EXPECT_GE(s.seed.edge_length(0, n), 50.0);
  }
}

TEST(ParseWithPrior, ZeroRasterStopsAfterSeed) {
  LikelihoodRaster r = constant_raster(100, 100, 0.0f);
  for (double T : {0.0, 1.0}) {
    ParseConfig cfg;
    cfg.temperature = T;
    GenSession s;
    RoadGraph out = parse_with_prior(r, zero_model(), Limits{}, cfg, &s);
    EXPECT_EQ(out.node_count(), 1u);
    EXPECT_EQ(s.step, 1);
    std::size_t fin = 0;
    for (const auto &e : s.events)
      if (e.kind == EventKind::NodeFinished) {
        ++fin;
        EXPECT_EQ(e.reason, "low_confidence");
      }
    EXPECT_EQ(fin, 1u);
  }
  // also for a trained-looking random model
  ModelParams m = random_params(tiny_config(EncoderMode::ContinuousPolar, AttrMode::None, false), 4, 2.0);
  EXPECT_EQ(parse_with_prior(r, m, Limits{}, ParseConfig{}).node_count(), 1u);
}

TEST(ParseWithPrior, UniformPriorFollowsStripe) {
  LikelihoodRaster r = render_likelihood(stripe_graph(), {0, 0, 400, 200}, 1.0, 2.0);
  ParseConfig cfg;
  cfg.seed = 3;
  cfg.budget.max_nodes = 400;
  RoadGraph out = parse_with_prior(r, zero_model(), Limits{}, cfg);
  EXPECT_GT(out.node_count(), 5u);
  std::size_t near = 0, total = 0;
  for (const auto &e : out.edges()) {
    Vec2 a = out.position(e.a), b = out.position(e.b);
    int n = std::max(1, static_cast<int>(distance(a, b)));
    for (int i = 0; i <= n; ++i) {
      Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
      near += std::abs(p.y - 100.0) <= 2.0;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(near) / total, 0.95) << near << "/" << total;
  EXPECT_TRUE(validate_generated(out, Limits{}).empty());
}

TEST(ParseWithPrior, LambdaZeroIsPlainGeneration) {
  LikelihoodRaster r = render_likelihood(plus_graph({100, 100}, 70), {0, 0, 200, 200}, 1.0, 4.0);
  ModelParams m = random_params(tiny_config(EncoderMode::DiscreteCartesian, AttrMode::None, false, 8, 100.0), 9, 1.0);
  ParseConfig cfg;
  cfg.lambda = 0.0;
  cfg.seed = 12;
  cfg.budget.max_nodes = 60;
  GenSession parsed;
  parse_with_prior(r, m, Limits{}, cfg, &parsed);
  RootSelection sel = select_root(r, cfg.skeleton);
  GenOptions opt;
  opt.region = r.extent();
  GenSession plain = init_session(subdivide(sel.seed, 100.0), std::nullopt, Limits{}, 12, opt);
  generate(plain, m, cfg.budget);
  ASSERT_EQ(parsed.events.size(), plain.events.size());
  for (std::size_t i = 0; i < plain.events.size(); ++i)
    EXPECT_EQ(to_json_string(parsed.events[i]), to_json_string(plain.events[i]));
}

TEST(ParseWithPrior, ArgmaxInvariantToGlobalScaling) {
  LikelihoodRaster r = render_likelihood(plus_graph({100, 100}, 70), {0, 0, 200, 200}, 1.0, 4.0, 5, 0.05);
  ModelParams m = random_params(tiny_config(EncoderMode::DiscreteCartesian, AttrMode::None, false, 8, 100.0), 2, 1.0);
  RoadGraph seed = subdivide(select_root(r).seed, 100.0);
  auto run = [&](float scale) {
    auto scaled = std::make_shared<LikelihoodRaster>(r);
    for (auto &v : scaled->values) v *= scale;
    GenOptions opt;
    opt.temperature = 0.0;
    opt.region = r.extent();
    GenSession s = init_session(seed, std::nullopt, Limits{}, 1, opt);
    s.prior = PriorOptions{scaled, 1.0, 1e-12};
    return to_canonical_json(generate(s, m, Budget{80, std::nullopt}));
  };
  std::string base = run(1.0f);
  EXPECT_EQ(run(0.5f), base);
  EXPECT_EQ(run(0.25f), base);
}

TEST(ParseWithPrior, DeterministicAndValid) {
  RoadGraph truth = make_grid(3, 3, 80.0, {40, 40});
  LikelihoodRaster r = render_likelihood(truth, {0, 0, 240, 240}, 1.0, 4.0, 7);
  ModelParams m = random_params(tiny_config(EncoderMode::DiscreteCartesian, AttrMode::Raster, false, 8, 100.0), 5, 1.0);
  ParseConfig cfg;
  cfg.seed = 4;
  cfg.budget.max_nodes = 100;
  Limits lim{4, 20, 0.5};
  RoadGraph a = parse_with_prior(r, m, lim, cfg), b = parse_with_prior(r, m, lim, cfg);
  EXPECT_EQ(to_canonical_json(a), to_canonical_json(b));
  EXPECT_TRUE(validate_generated(a, lim).empty());
  for (const auto &[id, n] : a.nodes()) EXPECT_TRUE(r.extent().contains(n.pos));
}

TEST(ParseWithPrior, ConfigValidation) {
  LikelihoodRaster r = constant_raster(10, 10, 0.0f);
  ParseConfig cfg;
  cfg.stop_threshold = 1.0;
  EXPECT_THROW(parse_with_prior(r, zero_model(), Limits{}, cfg), std::invalid_argument);
  cfg.stop_threshold = 0.05;
  cfg.lambda = -1;
  EXPECT_THROW(parse_with_prior(r, zero_model(), Limits{}, cfg), std::invalid_argument);
}
