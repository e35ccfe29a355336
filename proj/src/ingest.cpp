#include "ntg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "ntg/graph_io.hpp"

namespace ntg {

namespace {

constexpr double kDeg = kPi / 180.0;

double quantize_mm(double v) { return std::round(v * 1000.0) / 1000.0; }

std::uint64_t fnv1a(const std::string &s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double attr_double(const boost::property_tree::ptree &node, const char *key) {
  auto v = node.get_optional<std::string>(std::string("<xmlattr>.") + key);
  if (!v) throw DataError(std::string("osm: missing attribute ") + key);
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size() || !std::isfinite(d)) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception &) {
    throw DataError(std::string("osm: bad numeric attribute ") + key + "=\"" + *v + "\"");
  }
}

}  // namespace

Vec2 project(GeoPoint p, GeoPoint c) {
  return {kEarthRadius * (p.lon - c.lon) * kDeg * std::cos(c.lat * kDeg),
          kEarthRadius * (p.lat - c.lat) * kDeg};
}

GeoPoint unproject(Vec2 p, GeoPoint c) {
  return {c.lat + p.y / kEarthRadius / kDeg, c.lon + p.x / (kEarthRadius * std::cos(c.lat * kDeg)) / kDeg};
}

double haversine(GeoPoint a, GeoPoint b) {
  double dlat = (b.lat - a.lat) * kDeg, dlon = (b.lon - a.lon) * kDeg;
  double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(s)));
}

OsmResult parse_osm(const std::string &xml, const OsmOptions &opt) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(xml);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error &e) {
    throw DataError("osm: malformed XML at line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto root = tree.get_child_optional("osm");
  if (!root) throw DataError("osm: missing <osm> root element");

  std::map<std::int64_t, GeoPoint> coords;
  struct Way {
    std::vector<std::int64_t> refs;
    std::string highway;
  };
  std::vector<Way> ways;
  std::optional<GeoPoint> center;
  for (const auto &[tag, child] : *root) {
    if (tag == "bounds") {
      double a = attr_double(child, "minlat"), b = attr_double(child, "maxlat");
      double c = attr_double(child, "minlon"), d = attr_double(child, "maxlon");
      center = GeoPoint{(a + b) / 2, (c + d) / 2};
    } else if (tag == "node") {
      auto id = static_cast<std::int64_t>(attr_double(child, "id"));
      coords[id] = {attr_double(child, "lat"), attr_double(child, "lon")};
    } else if (tag == "way") {
      Way w;
      for (const auto &[wtag, wc] : child) {
        if (wtag == "nd") {
          w.refs.push_back(static_cast<std::int64_t>(attr_double(wc, "ref")));
        } else if (wtag == "tag" && wc.get<std::string>("<xmlattr>.k", "") == "highway") {
          w.highway = wc.get<std::string>("<xmlattr>.v", "");
          if (w.highway.empty()) w.highway = "road";
        }
      }
      if (!w.highway.empty()) ways.push_back(std::move(w));
    }
  }
  if (ways.empty()) throw DataError("osm: empty road set");

  std::set<std::int64_t> used;
  for (const auto &w : ways)
    for (auto r : w.refs)
      if (coords.contains(r)) used.insert(r);
  if (used.empty()) throw DataError("osm: empty road set");
  if (!center) {
    double lat0 = 1e9, lat1 = -1e9, lon0 = 1e9, lon1 = -1e9;
    for (auto id : used) {
      lat0 = std::min(lat0, coords[id].lat);
      lat1 = std::max(lat1, coords[id].lat);
      lon0 = std::min(lon0, coords[id].lon);
      lon1 = std::max(lon1, coords[id].lon);
    }
    center = GeoPoint{(lat0 + lat1) / 2, (lon0 + lon1) / 2};
  }

  RoadGraph g;
  std::map<std::int64_t, NodeId> node_of;
  for (auto id : used) {
    Vec2 p = project(coords[id], *center);
    p = {quantize_mm(p.x), quantize_mm(p.y)};
    if (auto near = g.nearest_within(p, kMergeTolerance)) {
      node_of[id] = *near;
    } else {
      node_of[id] = g.add_node(p);
    }
  }
  std::map<std::pair<NodeId, NodeId>, RoadType> types;
  for (const auto &w : ways) {
    RoadType t = opt.major_classes.contains(w.highway) ? RoadType::Major : RoadType::Minor;
    for (std::size_t i = 0; i + 1 < w.refs.size(); ++i) {
      auto a = node_of.find(w.refs[i]), b = node_of.find(w.refs[i + 1]);
      if (a == node_of.end() || b == node_of.end() || a->second == b->second) continue;
      g.add_edge(a->second, b->second);
      auto key = std::minmax(a->second, b->second);
      auto it = types.find(key);
      if (it == types.end() || t == RoadType::Major) types[key] = t;
    }
  }
  if (opt.edge_types)
    for (auto &[k, t] : types) g.set_edge_type(k.first, k.second, t);
  if (g.edge_count() == 0) throw DataError("osm: empty road set");
  OsmResult res;
  res.graph = opt.keep_largest ? renumbered(largest_component(g)) : renumbered(g);
  res.center = *center;
  res.ways = ways.size();
  return res;
}

RoadGraph crop(const RoadGraph &g, const BBox &box, bool keep_largest) {
  if (box.empty()) throw std::invalid_argument("empty crop box");
  RoadGraph out;
  for (const auto &[id, n] : g.nodes())
    if (box.contains(n.pos)) out.add_node(id, n.pos);
  NodeId next = g.next_id();
  auto node_at = [&](Vec2 p) -> NodeId {
    if (auto near = out.nearest_within(p, 1e-9)) return *near;
    out.add_node(next, p);
    return next++;
  };
  for (const auto &e : g.edges()) {
    Vec2 a = g.position(e.a), b = g.position(e.b);
    // Liang-Barsky
    double t0 = 0.0, t1 = 1.0;
    Vec2 d = b - a;
    bool visible = true;
    auto clip = [&](double p, double q) {
      if (p == 0.0) {
        if (q < 0.0) visible = false;
        return;
      }
      double r = q / p;
      if (p < 0.0) {
        if (r > t1) visible = false;
        else if (r > t0) t0 = r;
      } else {
        if (r < t0) visible = false;
        else if (r < t1) t1 = r;
      }
    };
    clip(-d.x, a.x - box.min_x);
    clip(d.x, box.max_x - a.x);
    clip(-d.y, a.y - box.min_y);
    clip(d.y, box.max_y - a.y);
    if (!visible || t1 - t0 <= 0.0) continue;
    NodeId u = t0 == 0.0 ? e.a : node_at(a + d * t0);
    NodeId v = t1 == 1.0 ? e.b : node_at(a + d * t1);
    if (u != v) out.add_edge(u, v, e.type);
  }
  if (out.edge_count() == 0 && out.node_count() == 0) throw DataError("crop: empty intersection");
  if (g.has_edge_types()) {
    for (const auto &e : out.edges())
      if (!e.type) out.set_edge_type(e.a, e.b, RoadType::Minor);
  }
  if (keep_largest) out = largest_component(out);
  if (out.empty()) throw DataError("crop: empty intersection");
  return out;
}

const char *to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string &s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw DataError("unknown split " + s);
}

Split assign_split(const std::string &tile_id, std::uint64_t seed) {
  std::uint64_t r = splitmix64(seed ^ fnv1a(tile_id)) % 6;
  if (r < 4) return Split::Train;
  return r == 4 ? Split::Val : Split::Test;
}

nlohmann::json to_json(const Dataset &d) {
  nlohmann::json j;
  j["styles"] = d.styles;
  j["graphs"] = nlohmann::json::array();
  for (const auto &e : d.entries) {
    nlohmann::json x{{"name", e.name}, {"file", e.file}, {"split", to_string(e.split)},
                     {"source", e.source}};
    x["style"] = e.style ? nlohmann::json(*e.style) : nlohmann::json(nullptr);
    if (!e.bbox.empty()) x["bbox"] = {e.bbox.min_x, e.bbox.min_y, e.bbox.max_x, e.bbox.max_y};
    x["center"] = {e.center.lat, e.center.lon};
    j["graphs"].push_back(std::move(x));
  }
  return j;
}

Dataset dataset_from_json(const nlohmann::json &j, const std::filesystem::path &root) {
  Dataset d;
  d.root = root;
  try {
    d.styles = j.value("styles", std::vector<std::string>{});
    for (const auto &x : j.at("graphs")) {
      DatasetEntry e;
      e.name = x.at("name").get<std::string>();
      e.file = x.at("file").get<std::string>();
      e.split = split_from_string(x.value("split", std::string("train")));
      e.source = x.value("source", std::string());
      if (x.contains("style") && !x["style"].is_null()) e.style = x["style"].get<int>();
      if (x.contains("bbox")) {
        auto b = x["bbox"];
        e.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      }
      if (x.contains("center")) e.center = {x["center"].at(0).get<double>(), x["center"].at(1).get<double>()};
      d.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception &ex) {
    throw DataError(std::string("manifest: ") + ex.what());
  }
  return d;
}

void save_manifest(const Dataset &d, const std::filesystem::path &path) {
  write_text_file(path, to_json(d).dump(2) + "\n");
}

Dataset load_manifest(const std::filesystem::path &path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception &ex) {
    throw DataError("manifest " + path.string() + ": " + ex.what());
  }
  return dataset_from_json(j, path.parent_path());
}

RoadGraph load_entry(const Dataset &d, const DatasetEntry &e) { return load_graph(d.root / e.file); }

GraphStats graph_stats(const RoadGraph &g) {
  return {g.node_count(), g.edge_count(), g.bbox().area() / 1e6, g.total_length() / 1000.0};
}

Dataset ingest_osm_files(const std::vector<std::pair<std::string, std::filesystem::path>> &cities,
                         const std::filesystem::path &out_dir, const IngestOptions &opt) {
  std::filesystem::create_directories(out_dir);
  Dataset d;
  d.root = out_dir;
  for (const auto &[city, file] : cities) {
    auto it = std::find(d.styles.begin(), d.styles.end(), city);
    int style = static_cast<int>(it - d.styles.begin());
    if (it == d.styles.end()) d.styles.push_back(city);
    OsmResult osm = parse_osm(read_text_file(file), opt.osm);
    auto add = [&](const std::string &name, const RoadGraph &g) {
      DatasetEntry e;
      e.name = name;
      e.file = name + ".json";
      e.style = style;
      e.split = assign_split(name, opt.seed);
      e.source = file.string();
      e.bbox = g.bbox();
      e.center = osm.center;
      save_graph(g, out_dir / e.file);
      d.entries.push_back(std::move(e));
    };
    if (opt.tile_size <= 0.0) {
      add(city + "_" + file.stem().string(), osm.graph);
      continue;
    }
    BBox b = osm.graph.bbox();
    int nx = std::max(1, static_cast<int>(std::ceil(b.width() / opt.tile_size)));
    int ny = std::max(1, static_cast<int>(std::ceil(b.height() / opt.tile_size)));
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        BBox t{b.min_x + i * opt.tile_size, b.min_y + j * opt.tile_size, b.min_x + (i + 1) * opt.tile_size,
               b.min_y + (j + 1) * opt.tile_size};
        RoadGraph tile;
        try {
          tile = renumbered(crop(osm.graph, t, true));
        } catch (const DataError &) {
          continue;
        }
        if (tile.node_count() < 2 || tile.total_length() < opt.min_tile_length) continue;
        add(city + "_" + file.stem().string() + "_" + std::to_string(i) + "_" + std::to_string(j), tile);
      }
    }
  }
  if (d.entries.empty()) throw DataError("ingest: no graph produced");
  save_manifest(d, out_dir / "manifest.json");
  return d;
}

}  // namespace ntg
