#pragma once

#include "ntg/model.hpp"

namespace ntg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // added to the gradient as wd * theta
};

/// First and second moments, shaped like the parameters.
struct AdamState {
  Tensors m, v;
  long step = 0;

  static AdamState for_params(const ModelParams &p);
};

/// One bias-corrected Adam update with L2 weight decay folded into the gradient.
void adam_step(ModelParams &params, const Gradients &grads, AdamState &state,
               const AdamConfig &cfg = {});

}  // namespace ntg
