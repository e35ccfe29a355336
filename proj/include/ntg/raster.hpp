#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntg/road_graph.hpp"

namespace ntg {

/// Georeferenced likelihood grid. Pixel (col, row) is centred at
/// (origin_x + col * resolution, origin_y - row * resolution); row 0 is the
/// northern edge.
struct LikelihoodRaster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resolution = 1.0;
  std::vector<float> values;  // row-major from the top-left pixel

  float at(std::int64_t col, std::int64_t row) const {
    return values[static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)];
  }
  float &at(std::int64_t col, std::int64_t row) {
    return values[static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col)];
  }
  bool inside(std::int64_t col, std::int64_t row) const {
    return col >= 0 && row >= 0 && col < width && row < height;
  }
  Vec2 pixel_center(double col, double row) const {
    return {origin_x + col * resolution, origin_y - row * resolution};
  }
  /// Fractional (col, row) of a metric position.
  std::pair<double, double> to_pixel(Vec2 p) const {
    return {(p.x - origin_x) / resolution, (origin_y - p.y) / resolution};
  }
  /// Bilinear interpolation between pixel centres; zero outside the grid.
  double sample(Vec2 p) const;
  /// Area covered by the pixels.
  BBox extent() const;
  bool operator==(const LikelihoodRaster &) const = default;
};

/// Throws DataError on empty size, bad resolution or values outside [0, 1].
void validate_raster(const LikelihoodRaster &r);

inline constexpr std::uint32_t kRasterVersion = 1;

std::string raster_bytes(const LikelihoodRaster &r);
LikelihoodRaster raster_from_bytes(const std::string &bytes);
void save_raster(const LikelihoodRaster &r, const std::filesystem::path &path);
LikelihoodRaster load_raster(const std::filesystem::path &path);

/// Pixel value clamp(1 - d / road_halfwidth, 0, 1) with d the distance to
/// the nearest edge, plus optional seeded Gaussian noise clipped to [0, 1].
LikelihoodRaster render_likelihood(const RoadGraph &g, const BBox &bbox, double resolution,
                                   double road_halfwidth,
                                   std::optional<std::uint64_t> noise_seed = std::nullopt,
                                   double noise_sigma = 0.1);

/// 1-px skeleton of a binary mask (Zhang-Suen), row-major, width x height.
std::vector<std::uint8_t> zhang_suen_thin(std::vector<std::uint8_t> mask, std::uint32_t width,
                                          std::uint32_t height);

struct SkeletonOptions {
  double threshold = 0.5;
  int min_spur_px = 6;  // dead-end branches shorter than this are pruned
  int smooth_radius = 0;  // box filter applied before thresholding
};

/// Mean over the (2 radius + 1)^2 window, clipped at the raster border.
LikelihoodRaster box_filter(const LikelihoodRaster &r, int radius);

/// Threshold, thin, trace junction/end pixels and chains, then simplify at
/// one pixel. Throws DataError when nothing survives the threshold.
RoadGraph graph_from_raster(const LikelihoodRaster &r, const SkeletonOptions &opt = {});

}  // namespace ntg
