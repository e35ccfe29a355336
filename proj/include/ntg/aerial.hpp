#pragma once

#include <cstdint>
#include <optional>

#include "ntg/generator.hpp"
#include "ntg/raster.hpp"

namespace ntg {

/// patch x patch pixels centred on `center` (zero outside the raster),
/// mean-pooled over 4x4 blocks, row-major.
VectorXd pooled_patch(const LikelihoodRaster &r, Vec2 center, int patch);

/// Learned projection of the pooled patch: the raster attribute vector.
VectorXd raster_attr(const LikelihoodRaster &r, Vec2 center, const ModelParams &p);

/// Attribute input for a node under the model's attribute mode.
AttrInput make_attr(const ModelConfig &cfg, std::optional<int> style, const LikelihoodRaster *raster,
                    Vec2 pos);

/// Mean likelihood over the 5x5 pixels around a position (pixels outside
/// the raster count as zero).
double local_confidence(const LikelihoodRaster &r, Vec2 pos);

struct RootSelection {
  RoadGraph seed;
  NodeId root = -1;
  double score = 0.0;
  bool fallback = false;  // no junction in the skeleton
};

/// Most confident skeleton junction plus its skeleton neighbours. Without a
/// junction, the skeleton node nearest the brightest pixel is used.
RootSelection select_root(const LikelihoodRaster &r, const SkeletonOptions &opt = {});

struct ParseConfig {
  double stop_threshold = 0.05;
  double lambda = 1.0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  SkeletonOptions skeleton{0.5, 6, 1};
  GenOptions gen;  // region defaults to the raster extent
  Budget budget;
};

/// Prior-guided parsing: generation from the selected root where every
/// decoded offset is drawn from prior_x * prior_y * likelihood^lambda.
RoadGraph parse_with_prior(const LikelihoodRaster &r, const ModelParams &model, const Limits &limits,
                           const ParseConfig &cfg, GenSession *session_out = nullptr);

}  // namespace ntg
