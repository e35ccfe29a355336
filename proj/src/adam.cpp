#include "ntg/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ntg {

AdamState AdamState::for_params(const ModelParams &p) {
  AdamState s;
  s.m = ModelParams::zeros(p.config).tensors;
  s.v = s.m;
  return s;
}

namespace {
template <class T>
std::vector<T *> flatten(auto &tensors) {
  std::vector<T *> out;
  tensors.visit([&](const char *, T &m) { out.push_back(&m); });
  return out;
}
}  // namespace

void adam_step(ModelParams &params, const Gradients &grads, AdamState &state,
               const AdamConfig &cfg) {
  auto theta = flatten<MatrixXd>(params.tensors);
  auto g = flatten<const MatrixXd>(grads.tensors);
  auto m = flatten<MatrixXd>(state.m);
  auto v = flatten<MatrixXd>(state.v);
  if (theta.size() != g.size() || theta.size() != m.size() || theta.size() != v.size())
    throw std::invalid_argument("optimizer state does not match the parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i]->rows() != g[i]->rows() || theta[i]->cols() != g[i]->cols())
      throw std::invalid_argument("gradient shape mismatch");
    MatrixXd gi = *g[i] + cfg.weight_decay * *theta[i];
    *m[i] = cfg.beta1 * *m[i] + (1.0 - cfg.beta1) * gi;
    *v[i] = cfg.beta2 * *v[i] + (1.0 - cfg.beta2) * gi.cwiseProduct(gi);
    theta[i]->array() -=
        cfg.lr * (m[i]->array() / bc1) / ((v[i]->array() / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace ntg
