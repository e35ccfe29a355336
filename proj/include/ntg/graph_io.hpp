#pragma once

#include <filesystem>
#include <string>

#include "ntg/road_graph.hpp"

namespace ntg {

/// Canonical JSON: nodes as [id, x, y] sorted by id, edges as [a, b(, type)]
/// with a < b sorted, coordinates with exactly three decimals. Byte-stable.
std::string to_canonical_json(const RoadGraph &g);
RoadGraph from_canonical_json(const std::string &text);

void save_graph(const RoadGraph &g, const std::filesystem::path &path);
RoadGraph load_graph(const std::filesystem::path &path);

/// FeatureCollection with one LineString per edge (local meters).
std::string to_geojson(const RoadGraph &g);
/// Builds a graph from LineString / MultiLineString features; vertices
/// within the merge tolerance are joined.
RoadGraph from_geojson(const std::string &text);

/// Formats with three decimals, never producing "-0.000".
std::string format_mm(double v);

std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

}  // namespace ntg
