#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ntg/paths.hpp"
#include "ntg/road_graph.hpp"

namespace ntg {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Network distances from `source` (Dijkstra over Euclidean edge lengths).
/// Nodes farther than cutoff are omitted.
std::unordered_map<NodeId, double> network_distances(const RoadGraph &g, NodeId source,
                                                     double cutoff = kUnreachable);

/// Edge length within network distance `radius` of a node, given its
/// distances; edges are truncated where the radius runs out.
double reach_within(const RoadGraph &g, const std::unordered_map<NodeId, double> &dist,
                    double radius);

inline constexpr std::array<double, 3> kReachRadii{100.0, 200.0, 300.0};

struct UrbanFeatures {
  std::array<double, 3> density{};  // node counts within 100/200/300 m, self included
  double connectivity = 0.0;        // degree
  std::array<double, 3> reach{};    // metres of road within network distance 100/200/300 m
  std::optional<double> convenience;

  /// [density x3, connectivity, reach x3, convenience]; absent without convenience.
  std::optional<Eigen::Matrix<double, 8, 1>> vector() const;
};

struct ConvenienceOptions {
  std::size_t partners = 32;
  double min_separation = 500.0;  // partners must be strictly farther than this
};

/// Convenience is the mean Euclidean / network distance ratio over up to
/// `partners` seeded partners; absent when no reachable partner qualifies.
UrbanFeatures urban_features(const RoadGraph &g, NodeId node, Rng &rng,
                             const ConvenienceOptions &opt = {});

/// Features for every node in id order with a single seeded stream.
std::vector<UrbanFeatures> urban_features_all(const RoadGraph &g, std::uint64_t seed,
                                              const ConvenienceOptions &opt = {});

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t count = 0;
};

/// Sample mean and unbiased covariance; needs at least two samples.
FeatureStats feature_stats(const std::vector<Eigen::VectorXd> &samples);

/// Statistics of all complete feature vectors across the graphs.
FeatureStats urban_feature_stats(const std::vector<RoadGraph> &graphs, std::uint64_t seed,
                                 const ConvenienceOptions &opt = {});

/// Fréchet distance between the Gaussians N(mean, cov).
double frechet_distance(const FeatureStats &a, const FeatureStats &b);

struct DiversityOptions {
  double step = 1.0;
  double radius = 10.0;
};

/// Mean of the two directed percentages of sampled road points lying
/// farther than radius from the other graph.
double diversity(const RoadGraph &g1, const RoadGraph &g2, const DiversityOptions &opt = {});
double directed_outside_fraction(const RoadGraph &from, const RoadGraph &to,
                                 const DiversityOptions &opt = {});

struct AplsOptions {
  double buffer = 5.0;
  double simplify_tolerance = 1.0;
  double subdivide_length = 30.0;
  std::size_t exhaustive_max_nodes = 200;
  std::size_t sampled_pairs = 20000;
  std::uint64_t seed = 0;
};

struct AplsResult {
  double score = 0.0;
  double forward = 0.0;   // source paths measured in target
  double backward = 0.0;  // target paths measured in source
  std::size_t forward_pairs = 0;
  std::size_t backward_pairs = 0;
};

AplsResult apls_report(const RoadGraph &source, const RoadGraph &target, const AplsOptions &opt = {});
double apls(const RoadGraph &source, const RoadGraph &target, const AplsOptions &opt = {});

/// One direction on already preprocessed graphs; pairs with infinite
/// source distance are skipped, and no finite pair gives 0.
double apls_directed(const RoadGraph &source, const RoadGraph &target, const AplsOptions &opt,
                     std::size_t *pairs = nullptr);

/// Closest on-road point of g within radius: (edge a, edge b, t) with a == b
/// for an isolated node. Ties go to the smallest (a, b).
struct RoadPoint {
  NodeId a;
  NodeId b;
  double t;
  Vec2 pos;
  double dist;
};
std::optional<RoadPoint> closest_road_point(const RoadGraph &g, Vec2 p, double radius);

/// Row 0 is the northern edge; pixel (col, row) is centred at
/// (min_x + (col + 0.5) * res, max_y - (row + 0.5) * res).
struct BinaryRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  double min_x = 0.0;
  double max_y = 0.0;
  double resolution = 1.0;
  std::vector<std::uint8_t> values;

  std::size_t count() const;
  Vec2 pixel_center(std::uint32_t col, std::uint32_t row) const {
    return {min_x + (col + 0.5) * resolution, max_y - (row + 0.5) * resolution};
  }
  bool same_geometry(const BinaryRaster &o) const {
    return width == o.width && height == o.height && min_x == o.min_x && max_y == o.max_y &&
           resolution == o.resolution;
  }
};

/// Pixels whose centre lies within half_width_px * resolution of an edge
/// (or of an isolated node).
BinaryRaster rasterize(const RoadGraph &g, const BBox &bbox, double resolution = 2.0,
                       double half_width_px = 2.0);

struct IouF1 {
  double iou = 0.0;
  double f1 = 0.0;
};

/// Both empty gives (1, 1). Throws std::invalid_argument on mismatched geometry.
IouF1 iou_f1(const BinaryRaster &pred, const BinaryRaster &gt);

}  // namespace ntg
