#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ntg/model.hpp"
#include "ntg/paths.hpp"

namespace ntg {

/// One incoming path as encoder input, in whichever form the config uses.
struct PathInput {
  std::vector<int> bin_x, bin_y;  // discrete-cartesian
  std::vector<PolarStep> polar;   // continuous-polar

  std::size_t steps() const { return polar.empty() ? bin_x.size() : polar.size(); }
  auto operator<=>(const PathInput &) const = default;
};

struct AttrInput {
  std::optional<int> style;  // style mode; none -> zero attribute
  VectorXd pooled;           // raster mode: mean-pooled likelihood patch
};

struct OutNode {
  int bin_x = 0;
  int bin_y = 0;
  std::optional<RoadType> type;
};

/// Encoder paths, attribute and the ccw-ordered ground-truth outgoing nodes.
struct NetSample {
  std::vector<PathInput> paths;
  AttrInput attr;
  std::vector<OutNode> outputs;
  std::size_t id = 0;
};

PathInput make_path_input(const ModelConfig &c, std::span<const Vec2> positions);
PathInput make_path_input(const ModelConfig &c, const RoadGraph &g, const Path &p);

/// Per-step values kept for backpropagation.
struct GruStep {
  VectorXd x, h, z, r, c;
};

/// h' = (1-z)*h + z*tanh(W_c x + U_c (r*h) + b_c). Throws on non-finite input.
VectorXd gru_cell(const GruTensors &w, const VectorXd &x, const VectorXd &h);

VectorXd attribute_vector(const ModelParams &p, const AttrInput &attr);

/// Context [h_enc, h_attr]: per-path bidirectional GRU final states summed
/// over the path set, followed by the attribute vector.
VectorXd encode(const ModelParams &p, std::span<const PathInput> paths, const AttrInput &attr);

struct StepLogits {
  VectorXd x, y;
  double stop = 0.0;
  VectorXd edge;  // empty without an edge-type head
};

/// Autoregressive decoder state. The first step is primed with the learned
/// start token; each later step sees the embedding of the previously emitted
/// offset.
class Decoder {
 public:
  Decoder(const ModelParams &p, VectorXd context);

  StepLogits step();
  void feed(int bin_x, int bin_y);
  const VectorXd &hidden() const { return h_; }

 private:
  const ModelParams *p_;
  VectorXd ctx_;
  VectorXd h_;
  VectorXd prev_;
};

struct Rollout {
  std::vector<StepLogits> steps;
  bool truncated = false;
};

/// Teacher-forced when `teacher` is non-empty; otherwise greedy until the
/// stop probability exceeds 0.5. More than max_steps steps truncates.
Rollout decode_rollout(const ModelParams &p, const VectorXd &context, std::size_t max_steps,
                       std::span<const OutNode> teacher = {});

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t sample_id)
      : std::runtime_error("non-finite loss in sample " + std::to_string(sample_id)),
        sample_id(sample_id) {}
  std::size_t sample_id;
};

struct LossOptions {
  double clip_norm = 1.0;  // <= 0 disables clipping
  int threads = 1;         // reduction order is fixed for a given count
};

struct LossResult {
  double loss = 0.0;  // mean over decoder steps
  Gradients grads;
  std::size_t steps = 0;
  std::size_t correct_x = 0;
  std::size_t correct_y = 0;
};

LossResult loss_and_grad(const ModelParams &p, std::span<const NetSample> batch,
                         const LossOptions &opt = {});

struct EvalResult {
  double loss = 0.0;
  std::size_t steps = 0;
  std::size_t correct_x = 0;
  std::size_t correct_y = 0;
  double accuracy_x() const { return steps ? double(correct_x) / double(steps) : 0.0; }
  double accuracy_y() const { return steps ? double(correct_y) / double(steps) : 0.0; }
};

/// Teacher-forced loss and top-1 per-axis accuracy without gradients.
EvalResult evaluate(const ModelParams &p, std::span<const NetSample> samples);

}  // namespace ntg
