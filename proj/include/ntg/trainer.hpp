#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ntg/network.hpp"
#include "ntg/raster.hpp"

namespace ntg {

/// A training graph with its style id and, for raster-conditioned models,
/// the likelihood raster it was rendered to.
struct TrainItem {
  std::string name;
  RoadGraph graph;
  std::optional<int> style;
  std::shared_ptr<const LikelihoodRaster> raster;
};

struct TrainConfig {
  ModelConfig model;
  int epochs = 20;
  int batch_size = 16;
  double lr = 1e-3;
  double lr_decay = 1.0;  // multiplied into lr after every epoch
  double weight_decay = 1e-4;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;
  int checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  std::string init = "random";  // or "zeros"
  std::filesystem::path checkpoint_dir;
  std::filesystem::path metrics_log;

  void validate() const;
};

/// Flat key=value text; '#' starts a comment. Unknown keys are rejected.
TrainConfig parse_train_config(const std::string &text, TrainConfig base = {});

/// One sample per non-isolated node of subdivide(graph, offset_range), with
/// K ~ U[1, min(available paths, max_paths)] incoming walks and the
/// ccw-ordered neighbours as targets.
std::vector<NetSample> build_samples(const TrainItem &item, const ModelConfig &cfg, Rng &rng,
                                     std::size_t first_id = 0);

/// Generator seed for (seed, epoch, graph index).
std::uint64_t sample_seed(std::uint64_t seed, int epoch, std::size_t graph_index);

/// All samples of one epoch, reproducible per (dataset, seed, epoch).
std::vector<NetSample> epoch_samples(const std::vector<TrainItem> &data, const ModelConfig &cfg,
                                     std::uint64_t seed, int epoch);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy_x = 0.0;
  double accuracy_y = 0.0;
  std::size_t steps = 0;
  double seconds = 0.0;
};

std::string to_json_line(const EpochMetrics &m);

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> log;  // entry 0 evaluates the initial parameters
  bool diverged = false;
  std::string error;
};

/// Shuffled mini-batch Adam over freshly sampled paths each epoch. On a
/// non-finite loss, stops and returns the parameters of the last completed
/// epoch.
TrainResult train(const std::vector<TrainItem> &data, const TrainConfig &cfg);

}  // namespace ntg
