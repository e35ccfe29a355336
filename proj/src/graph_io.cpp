#include "ntg/graph_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ntg {

using nlohmann::json;

std::string format_mm(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string to_canonical_json(const RoadGraph &g) {
  std::string out = "{\n\"nodes\": [";
  bool first = true;
  for (const auto &[id, n] : g.nodes()) {
    out += first ? "\n" : ",\n";
    first = false;
    out += "[" + std::to_string(id) + ", " + format_mm(n.pos.x) + ", " + format_mm(n.pos.y) + "]";
  }
  out += "\n],\n\"edges\": [";
  first = true;
  for (const auto &e : g.edges()) {
    out += first ? "\n" : ",\n";
    first = false;
    out += "[" + std::to_string(e.a) + ", " + std::to_string(e.b);
    if (e.type) out += std::string(", \"") + to_string(*e.type) + "\"";
    out += "]";
  }
  out += "\n]\n}\n";
  return out;
}

RoadGraph from_canonical_json(const std::string &text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw DataError(std::string("graph JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges"))
    throw DataError("graph JSON: expected object with 'nodes' and 'edges'");
  RoadGraph g;
  try {
    for (const auto &n : doc.at("nodes")) {
      if (!n.is_array() || n.size() != 3) throw DataError("graph JSON: node must be [id, x, y]");
      g.add_node(n[0].get<NodeId>(), {n[1].get<double>(), n[2].get<double>()});
    }
    for (const auto &e : doc.at("edges")) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3)
        throw DataError("graph JSON: edge must be [a, b] or [a, b, type]");
      std::optional<RoadType> t;
      if (e.size() == 3) t = road_type_from_string(e[2].get<std::string>());
      NodeId a = e[0].get<NodeId>(), b = e[1].get<NodeId>();
      if (!g.has_node(a) || !g.has_node(b)) throw DataError("graph JSON: edge references unknown node");
      if (a == b) throw DataError("graph JSON: self-loop");
      g.add_edge(a, b, t);
    }
  } catch (const json::exception &e) {
    throw DataError(std::string("graph JSON: ") + e.what());
  } catch (const std::invalid_argument &e) {
    throw DataError(std::string("graph JSON: ") + e.what());
  }
  return g;
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void save_graph(const RoadGraph &g, const std::filesystem::path &path) {
  write_text_file(path, to_canonical_json(g));
}

RoadGraph load_graph(const std::filesystem::path &path) {
  return from_canonical_json(read_text_file(path));
}

std::string to_geojson(const RoadGraph &g) {
  json features = json::array();
  for (const auto &e : g.edges()) {
    Vec2 a = g.position(e.a), b = g.position(e.b);
    json props = {{"a", e.a}, {"b", e.b}};
    if (e.type) props["road_type"] = to_string(*e.type);
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry",
                         {{"type", "LineString"}, {"coordinates", {{a.x, a.y}, {b.x, b.y}}}}}});
  }
  json doc = {{"type", "FeatureCollection"},
              {"properties", {{"units", "meters"}, {"frame", "local-planar"}}},
              {"features", features}};
  return doc.dump(1) + "\n";
}

RoadGraph from_geojson(const std::string &text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw DataError(std::string("GeoJSON: ") + e.what());
  }
  RoadGraph g;
  auto node_at = [&](Vec2 p) {
    if (auto hit = g.nearest_within(p, kMergeTolerance)) return *hit;
    return g.add_node(p);
  };
  auto add_line = [&](const json &coords, std::optional<RoadType> type) {
    std::optional<NodeId> prev;
    for (const auto &c : coords) {
      NodeId id = node_at({c.at(0).get<double>(), c.at(1).get<double>()});
      if (prev && *prev != id) g.add_edge(*prev, id, type);
      prev = id;
    }
  };
  try {
    for (const auto &f : doc.at("features")) {
      const auto &geom = f.at("geometry");
      std::optional<RoadType> type;
      if (f.contains("properties") && f["properties"].is_object() &&
          f["properties"].contains("road_type"))
        type = road_type_from_string(f["properties"]["road_type"].get<std::string>());
      std::string kind = geom.at("type").get<std::string>();
      if (kind == "LineString") {
        add_line(geom.at("coordinates"), type);
      } else if (kind == "MultiLineString") {
        for (const auto &line : geom.at("coordinates")) add_line(line, type);
      }
    }
  } catch (const json::exception &e) {
    throw DataError(std::string("GeoJSON: ") + e.what());
  }
  return g;
}

}  // namespace ntg
