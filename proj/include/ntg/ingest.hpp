#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntg/road_graph.hpp"

namespace ntg {

inline constexpr double kEarthRadius = 6371000.0;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

/// Equirectangular projection about a reference point, in meters.
Vec2 project(GeoPoint p, GeoPoint center);
GeoPoint unproject(Vec2 p, GeoPoint center);
double haversine(GeoPoint a, GeoPoint b);

struct OsmOptions {
  bool edge_types = false;
  std::set<std::string> major_classes{"motorway", "trunk", "primary", "secondary"};
  bool keep_largest = true;
};

struct OsmResult {
  RoadGraph graph;
  GeoPoint center;
  std::size_t ways = 0;
};

/// Highway ways of an OSM XML document as a metric graph. Throws DataError
/// on malformed XML (with line number) or when no road survives.
OsmResult parse_osm(const std::string &xml, const OsmOptions &opt = {});

/// Clips edges at the box (inserting boundary nodes) and, by default, keeps
/// the largest component. Throws DataError when nothing intersects.
RoadGraph crop(const RoadGraph &g, const BBox &box, bool keep_largest = true);

enum class Split { Train, Val, Test };
const char *to_string(Split s);
Split split_from_string(const std::string &s);

/// 4-1-1 assignment from a seeded hash of the tile id.
Split assign_split(const std::string &tile_id, std::uint64_t seed);

struct DatasetEntry {
  std::string name;
  std::string file;  // relative to the manifest
  std::optional<int> style;
  Split split = Split::Train;
  std::string source;
  BBox bbox;
  GeoPoint center;
};

struct Dataset {
  std::vector<std::string> styles;
  std::vector<DatasetEntry> entries;
  std::filesystem::path root;  // directory holding the manifest
};

nlohmann::json to_json(const Dataset &d);
Dataset dataset_from_json(const nlohmann::json &j, const std::filesystem::path &root);
void save_manifest(const Dataset &d, const std::filesystem::path &path);
Dataset load_manifest(const std::filesystem::path &path);
RoadGraph load_entry(const Dataset &d, const DatasetEntry &e);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double area_km2 = 0.0;
  double length_km = 0.0;
};
GraphStats graph_stats(const RoadGraph &g);

struct IngestOptions {
  OsmOptions osm;
  double tile_size = 0.0;  // meters; 0 keeps the whole extract
  double min_tile_length = 500.0;
  std::uint64_t seed = 0;
};

/// Ingests OSM extracts into graph files plus a manifest under out_dir; one
/// style per distinct city name.
Dataset ingest_osm_files(const std::vector<std::pair<std::string, std::filesystem::path>> &cities,
                         const std::filesystem::path &out_dir, const IngestOptions &opt);

}  // namespace ntg
