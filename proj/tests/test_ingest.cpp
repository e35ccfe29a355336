#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "ntg/graph_io.hpp"
#include "ntg/graph_ops.hpp"
#include "ntg/ingest.hpp"
#include "ntg/raster.hpp"
#include "support.hpp"

using namespace ntg;
using ntg::testing::make_grid;
using ntg::testing::random_planar_graph;

namespace {

std::filesystem::path fixture(const char *name) { return std::filesystem::path(NTG_FIXTURES) / name; }

std::filesystem::path temp_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("ntg_ingest_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string osm_way(const std::vector<std::pair<double, double>> &pts, const char *highway) {
  std::string s = "<osm>";
  for (std::size_t i = 0; i < pts.size(); ++i)
    s += "<node id=\"" + std::to_string(i + 1) + "\" lat=\"" + std::to_string(pts[i].first) + "\" lon=\"" +
         std::to_string(pts[i].second) + "\"/>";
  s += "<way id=\"1\">";
  for (std::size_t i = 0; i < pts.size(); ++i) s += "<nd ref=\"" + std::to_string(i + 1) + "\"/>";
  if (highway) s += std::string("<tag k=\"highway\" v=\"") + highway + "\"/>";
  s += "</way></osm>";
  return s;
}

}  // namespace

TEST(Projection, EquatorLongitudeStep) {
  Vec2 p = project({0.0, 0.001}, {0.0, 0.0});
  EXPECT_NEAR(p.x, 6371000.0 * 0.001 * kPi / 180.0, 1e-9);
  EXPECT_NEAR(p.x, 111.19, 0.01);
  EXPECT_EQ(p.y, 0.0);
}

TEST(Projection, RoundTripAndHaversineAgreeLocally) {
  GeoPoint c{48.85, 2.35};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2000, 2000);
  for (int i = 0; i < 50; ++i) {
    Vec2 p{u(rng), u(rng)};
    GeoPoint g = unproject(p, c);
    Vec2 q = project(g, c);
    EXPECT_NEAR(q.x, p.x, 1e-6);
    EXPECT_NEAR(q.y, p.y, 1e-6);
    // equirectangular error stays tiny at city scale
    EXPECT_NEAR(haversine(c, g), p.norm(), 1e-3 * p.norm() + 1e-6);
  }
}

TEST(ParseOsm, CrossingFixtureGivesFiveNodesFourEdges) {
  OsmResult r = parse_osm(read_text_file(fixture("crossing.osm")), {.edge_types = true});
  const RoadGraph &g = r.graph;
  EXPECT_EQ(g.node_count(), 5u);
  EXPECT_EQ(g.edge_count(), 4u);
  EXPECT_EQ(r.ways, 2u);
  std::size_t deg4 = 0;
  NodeId center = -1;
  for (const auto &[id, n] : g.nodes())
    if (n.neighbors.size() == 4) {
      ++deg4;
      center = id;
    }
  ASSERT_EQ(deg4, 1u);
  EXPECT_NEAR(g.position(center).x, 0.0, 1e-9);
  EXPECT_NEAR(g.position(center).y, 0.0, 1e-9);
  for (NodeId n : g.neighbors(center)) {
    EXPECT_NEAR(g.edge_length(center, n), 111.195, 1e-3);
    bool east_west = std::abs(g.position(n).y) < 1e-6;
    EXPECT_EQ(g.edge_type(center, n), east_west ? RoadType::Major : RoadType::Minor);
  }
  EXPECT_TRUE(validate_invariants(g).empty());
}

TEST(ParseOsm, UntypedByDefault) {
  OsmResult r = parse_osm(read_text_file(fixture("crossing.osm")));
  EXPECT_FALSE(r.graph.has_edge_types());
}

TEST(ParseOsm, EdgeLengthFromProjectionFormula) {
  OsmResult r = parse_osm(osm_way({{0.0, 0.0}, {0.0, 0.001}}, "residential"));
  ASSERT_EQ(r.graph.edge_count(), 1u);
  auto e = r.graph.edges().front();
  double expect = 6371000.0 * 0.0005 * kPi / 180.0 * 2;
  EXPECT_NEAR(r.graph.edge_length(e.a, e.b), expect, 1e-3);
  EXPECT_NEAR(r.graph.edge_length(e.a, e.b), 111.19, 0.01);
}

TEST(ParseOsm, MergesNodesWithinHalfMeter) {
  // second and third points 0.2 m apart
  double d = 0.2 / 6371000.0 * 180.0 / kPi;
  OsmResult r = parse_osm(osm_way({{0.0, 0.0}, {0.0, 0.001}, {d, 0.001}, {0.0, 0.002}}, "residential"));
  EXPECT_EQ(r.graph.node_count(), 3u);
  EXPECT_EQ(r.graph.edge_count(), 2u);
}

TEST(ParseOsm, Errors) {
  try {
    parse_osm("<osm>\n<node id=\"1\" lat=\"0\" lon=\"0\">\n</osm>");
    FAIL();
  } catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
  try {
    parse_osm(osm_way({{0.0, 0.0}, {0.0, 0.001}}, nullptr));
    FAIL();
  } catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("empty road set"), std::string::npos);
  }
  EXPECT_THROW(parse_osm("<notosm/>"), DataError);
  EXPECT_THROW(parse_osm("<osm><node id=\"1\" lat=\"x\" lon=\"0\"/></osm>"), DataError);
}

TEST(ParseOsm, SyntheticCityKeepsLargestComponentOfRoadsOnly) {
  for (const char *name : {"city_a.osm", "city_b.osm"}) {
    OsmResult r = parse_osm(read_text_file(fixture(name)), {.edge_types = true});
    const RoadGraph &g = r.graph;
    EXPECT_TRUE(validate_invariants(g).empty()) << name;
    EXPECT_EQ(connected_components(g).size(), 1u) << name;
    EXPECT_GT(g.node_count(), 100u) << name;
    // the isolated service road and the building are gone
    EXPECT_LT(g.bbox().width(), 1500.0) << name;
    for (const auto &e : g.edges()) EXPECT_TRUE(e.type.has_value());
    std::vector<NodeId> ids = g.node_ids();
    EXPECT_EQ(ids.front(), 0);
    EXPECT_EQ(ids.back(), static_cast<NodeId>(ids.size() - 1));
  }
}

TEST(ParseOsm, CanonicalJsonReingestIsIdentity) {
  OsmResult r = parse_osm(read_text_file(fixture("city_a.osm")), {.edge_types = true});
  RoadGraph back = from_canonical_json(to_canonical_json(r.graph));
  EXPECT_TRUE(back == r.graph);
  EXPECT_EQ(to_canonical_json(back), to_canonical_json(r.graph));
}

TEST(ParseOsm, OffsetsRepresentableAfterSubdivision) {
  for (const char *name : {"city_a.osm", "city_b.osm"}) {
    RoadGraph g = subdivide(parse_osm(read_text_file(fixture(name))).graph, 100.0);
    for (const auto &e : g.edges()) {
      Vec2 d = g.position(e.b) - g.position(e.a);
      EXPECT_LE(std::abs(d.x), 100.0);
      EXPECT_LE(std::abs(d.y), 100.0);
    }
  }
}

// length of g inside box: split each edge at its crossings with the four box
// lines and keep the pieces whose midpoint lies inside
static double clipped_length(const RoadGraph &g, const BBox &box) {
  double total = 0.0;
  for (const auto &e : g.edges()) {
    Vec2 a = g.position(e.a), b = g.position(e.b);
    std::vector<double> ts{0.0, 1.0};
    auto cut = [&](double p0, double p1, double line) {
      if (p0 != p1) {
        double t = (line - p0) / (p1 - p0);
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    };
    cut(a.x, b.x, box.min_x);
    cut(a.x, b.x, box.max_x);
    cut(a.y, b.y, box.min_y);
    cut(a.y, b.y, box.max_y);
    std::sort(ts.begin(), ts.end());
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
      Vec2 m = a + (b - a) * ((ts[i] + ts[i + 1]) / 2);
      if (box.contains(m)) total += (ts[i + 1] - ts[i]) * distance(a, b);
    }
  }
  return total;
}

TEST(Crop, CoveringBoxIsIdentity) {
  RoadGraph g = make_grid(4, 4, 100.0);
  EXPECT_TRUE(crop(g, g.bbox().expanded(1.0)) == g);
}

TEST(Crop, CutEdgeGetsBoundaryNode) {
  RoadGraph g;
  g.add_node(0, {0, 0});
  g.add_node(1, {100, 0});
  RoadGraph c = crop(g, {-10, -10, 40, 10});
  ASSERT_EQ(c.node_count(), 1u);
  g.add_edge(0, 1);
  c = crop(g, {-10, -10, 40, 10});
  ASSERT_EQ(c.node_count(), 2u);
  ASSERT_EQ(c.edge_count(), 1u);
  auto e = c.edges().front();
  EXPECT_EQ(c.position(e.a), (Vec2{0, 0}));
  EXPECT_NEAR(c.position(e.b).x, 40.0, 1e-9);
}

TEST(Crop, RetainedLengthMatchesClippingOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RoadGraph g = random_planar_graph(40, 600.0, 180.0, seed);
    BBox box{110.0, 90.0, 430.0, 470.0};
    RoadGraph c = crop(g, box, false);
    EXPECT_NEAR(c.total_length(), clipped_length(g, box), 1e-6);
    for (const auto &[id, n] : c.nodes()) EXPECT_TRUE(box.contains(n.pos, 1e-3));
  }
}

TEST(Crop, EmptyIntersectionThrows) {
  RoadGraph g = make_grid(3, 3, 100.0);
  EXPECT_THROW(crop(g, {1000, 1000, 2000, 2000}), DataError);
}

TEST(Splits, FourOneOneAndDeterministic) {
  std::map<Split, int> counts;
  for (int i = 0; i < 6000; ++i) {
    std::string id = "tile_" + std::to_string(i);
    Split s = assign_split(id, 9);
    EXPECT_EQ(s, assign_split(id, 9));
    counts[s]++;
  }
  EXPECT_NEAR(counts[Split::Train] / 6000.0, 4.0 / 6, 0.03);
  EXPECT_NEAR(counts[Split::Val] / 6000.0, 1.0 / 6, 0.03);
  EXPECT_NEAR(counts[Split::Test] / 6000.0, 1.0 / 6, 0.03);
  for (Split s : {Split::Train, Split::Val, Split::Test}) EXPECT_EQ(split_from_string(to_string(s)), s);
  EXPECT_THROW(split_from_string("holdout"), DataError);
}

TEST(Dataset, IngestWritesManifestAndConnectedGraphs) {
  auto dir = temp_dir("cities");
  IngestOptions opt;
  opt.tile_size = 600.0;
  opt.seed = 4;
  Dataset d = ingest_osm_files({{"alpha", fixture("city_a.osm")}, {"beta", fixture("city_b.osm")}}, dir, opt);
  EXPECT_EQ(d.styles, (std::vector<std::string>{"alpha", "beta"}));
  EXPECT_GE(d.entries.size(), 4u);
  Dataset back = load_manifest(dir / "manifest.json");
  ASSERT_EQ(back.entries.size(), d.entries.size());
  std::set<std::string> names;
  for (const auto &e : back.entries) {
    EXPECT_TRUE(names.insert(e.name).second);
    RoadGraph g = load_entry(back, e);
    EXPECT_EQ(connected_components(g).size(), 1u);
    EXPECT_GE(g.total_length(), opt.min_tile_length);
    EXPECT_EQ(e.split, assign_split(e.name, 4));
    ASSERT_TRUE(e.style);
    EXPECT_EQ(back.styles[*e.style], e.name.substr(0, e.name.find('_')));
  }
}

TEST(Dataset, StatsOfGrid) {
  GraphStats s = graph_stats(make_grid(3, 3, 500.0));
  EXPECT_EQ(s.nodes, 9u);
  EXPECT_EQ(s.edges, 12u);
  EXPECT_DOUBLE_EQ(s.area_km2, 1.0);
  EXPECT_DOUBLE_EQ(s.length_km, 6.0);
}

TEST(Dataset, MalformedManifest) {
  auto dir = temp_dir("bad");
  write_text_file(dir / "manifest.json", "{\"graphs\": [{\"file\": \"x.json\"}]}");
  EXPECT_THROW(load_manifest(dir / "manifest.json"), DataError);
  write_text_file(dir / "manifest.json", "not json");
  EXPECT_THROW(load_manifest(dir / "manifest.json"), DataError);
}

// raster format

namespace {
LikelihoodRaster random_raster(std::uint32_t w, std::uint32_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  LikelihoodRaster r{w, h, 12.5, -3.25, 0.75, {}};
  r.values.resize(static_cast<std::size_t>(w) * h);
  for (auto &v : r.values) v = u(rng);
  return r;
}
}  // namespace

TEST(RasterIo, BitExactRoundTrip) {
  LikelihoodRaster r = random_raster(37, 21, 5);
  std::string bytes = raster_bytes(r);
  EXPECT_EQ(bytes.size(), 4 + 3 * 4 + 3 * 8 + 37 * 21 * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "NTGR");
  LikelihoodRaster back = raster_from_bytes(bytes);
  EXPECT_TRUE(back == r);
  EXPECT_EQ(raster_bytes(back), bytes);
  auto dir = temp_dir("raster");
  save_raster(r, dir / "r.ntgr");
  EXPECT_TRUE(load_raster(dir / "r.ntgr") == r);
}

TEST(RasterIo, LittleEndianLayout) {
  LikelihoodRaster r{1, 1, 1.0, 2.0, 0.5, {0.25f}};
  std::string b = raster_bytes(r);
  std::uint32_t version;
  std::memcpy(&version, b.data() + 4, 4);
  EXPECT_EQ(version, 1u);
  double res;
  std::memcpy(&res, b.data() + 4 + 12 + 16, 8);
  EXPECT_EQ(res, 0.5);
  float v;
  std::memcpy(&v, b.data() + b.size() - 4, 4);
  EXPECT_EQ(v, 0.25f);
}

TEST(RasterIo, Rejections) {
  LikelihoodRaster empty{0, 0, 0, 0, 1, {}};
  EXPECT_THROW(raster_bytes(empty), DataError);
  LikelihoodRaster over{1, 1, 0, 0, 1, {1.0000001f}};
  EXPECT_THROW(raster_bytes(over), DataError);
  LikelihoodRaster neg{1, 1, 0, 0, 0.0, {0.5f}};
  EXPECT_THROW(raster_bytes(neg), DataError);
  std::string good = raster_bytes(random_raster(4, 3, 1));
  EXPECT_THROW(raster_from_bytes("NTGX" + good.substr(4)), DataError);
  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(raster_from_bytes(bad_version), DataError);
  EXPECT_THROW(raster_from_bytes(good.substr(0, good.size() - 1)), DataError);
  EXPECT_THROW(raster_from_bytes(good + "x"), DataError);
  std::string zero = good;
  std::memset(zero.data() + 8, 0, 4);
  EXPECT_THROW(raster_from_bytes(zero), DataError);
  std::string out_of_range = good;
  float big = 2.0f;
  std::memcpy(out_of_range.data() + out_of_range.size() - 4, &big, 4);
  EXPECT_THROW(raster_from_bytes(out_of_range), DataError);
}

TEST(RasterSample, BilinearAndZeroOutside) {
  LikelihoodRaster r{2, 2, 0.0, 1.0, 1.0, {0.0f, 1.0f, 0.5f, 0.25f}};
  EXPECT_DOUBLE_EQ(r.sample({0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(r.sample({1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(r.sample({0, 0}), 0.5);
  EXPECT_DOUBLE_EQ(r.sample({0.5, 0.5}), (0.0 + 1.0 + 0.5 + 0.25) / 4);
  EXPECT_DOUBLE_EQ(r.sample({100, 100}), 0.0);
  BBox e = r.extent();
  EXPECT_EQ(e, (BBox{-0.5, -0.5, 1.5, 1.5}));
}

TEST(Render, MatchesBruteForceDistanceScan) {
  RoadGraph g = random_planar_graph(15, 200.0, 90.0, 8);
  BBox box = g.bbox().expanded(20.0);
  LikelihoodRaster r = render_likelihood(g, box, 2.0, 6.0);
  validate_raster(r);
  auto edges = g.edges();
  for (std::uint32_t row = 0; row < r.height; ++row) {
    for (std::uint32_t col = 0; col < r.width; ++col) {
      Vec2 p = r.pixel_center(col, row);
      double d = std::numeric_limits<double>::infinity();
      for (const auto &e : edges) d = std::min(d, point_segment_distance(p, g.position(e.a), g.position(e.b)));
      float expect = static_cast<float>(std::clamp(1.0 - d / 6.0, 0.0, 1.0));
      ASSERT_EQ(r.at(col, row), expect) << col << "," << row;
    }
  }
}

TEST(Render, OnEdgeIsOneAndFarIsZero) {
  RoadGraph g;
  g.add_node(0, {0.5, 0.5});
  g.add_node(1, {20.5, 0.5});
  g.add_edge(0, 1);
  LikelihoodRaster r = render_likelihood(g, {0, -10, 21, 11}, 1.0, 3.0);
  auto [c, row] = r.to_pixel({10.5, 0.5});
  EXPECT_EQ(r.at(std::lround(c), std::lround(row)), 1.0f);
  auto [c2, row2] = r.to_pixel({10.5, 8.5});
  EXPECT_EQ(r.at(std::lround(c2), std::lround(row2)), 0.0f);
}

TEST(Render, SeededNoiseIsReproducibleAndClipped) {
  RoadGraph g = make_grid(2, 2, 50.0);
  BBox box = g.bbox().expanded(10.0);
  LikelihoodRaster a = render_likelihood(g, box, 1.0, 4.0, 11);
  LikelihoodRaster b = render_likelihood(g, box, 1.0, 4.0, 11);
  LikelihoodRaster c = render_likelihood(g, box, 1.0, 4.0, 12);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  validate_raster(a);
}

TEST(Thinning, SkeletonIsSubsetAndOnePixelWide) {
  std::uint32_t w = 40, h = 20;
  std::vector<std::uint8_t> m(w * h, 0);
  for (std::uint32_t y = 7; y < 13; ++y)
    for (std::uint32_t x = 3; x < 37; ++x) m[y * w + x] = 1;
  auto s = zhang_suen_thin(m, w, h);
  std::size_t on = 0;
  for (std::uint32_t x = 0; x < w; ++x) {
    int col = 0;
    for (std::uint32_t y = 0; y < h; ++y) {
      if (s[y * w + x]) {
        EXPECT_TRUE(m[y * w + x]);
        ++col;
        ++on;
      }
    }
    EXPECT_LE(col, 1);
  }
  EXPECT_GT(on, 25u);
  EXPECT_EQ(zhang_suen_thin(s, w, h), s);
}

TEST(GraphFromRaster, StraightStripe) {
  RoadGraph g;
  g.add_node(0, {20, 50});
  g.add_node(1, {180, 50});
  g.add_edge(0, 1);
  LikelihoodRaster r = render_likelihood(g, {0, 0, 200, 100}, 1.0, 4.0);
  RoadGraph s = graph_from_raster(r);
  ASSERT_EQ(s.node_count(), 2u);
  ASSERT_EQ(s.edge_count(), 1u);
  for (const auto &[id, n] : s.nodes()) EXPECT_NEAR(n.pos.y, 50.0, 1.0);
  auto e = s.edges().front();
  EXPECT_NEAR(s.edge_length(e.a, e.b), 160.0, 8.0);
}

TEST(GraphFromRaster, PlusRecoversDegreeFourJunction) {
  RoadGraph g;
  g.add_node(0, {100, 100});
  g.add_node(1, {20, 100});
  g.add_node(2, {180, 100});
  g.add_node(3, {100, 20});
  g.add_node(4, {100, 180});
  for (NodeId i = 1; i <= 4; ++i) g.add_edge(0, i);
  LikelihoodRaster r = render_likelihood(g, {0, 0, 200, 200}, 1.0, 4.0);
  RoadGraph s = graph_from_raster(r);
  std::size_t junctions = 0;
  for (const auto &[id, n] : s.nodes()) {
    if (n.neighbors.size() == 4) {
      ++junctions;
      EXPECT_NEAR(n.pos.x, 100.0, 2.0);
      EXPECT_NEAR(n.pos.y, 100.0, 2.0);
    }
  }
  EXPECT_EQ(junctions, 1u);
  EXPECT_EQ(s.edge_count(), 4u);
}

TEST(GraphFromRaster, EmptyAfterThresholdThrows) {
  LikelihoodRaster r{10, 10, 0, 0, 1, std::vector<float>(100, 0.2f)};
  EXPECT_THROW(graph_from_raster(r), DataError);
}
