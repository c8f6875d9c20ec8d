#pragma once

#include <cmath>

#include "dpsr/core.hpp"

namespace dpsr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Vec m;
  Vec v;
  long step = 0;

  AdamState() = default;
  AdamState(Index n, AdamConfig cfg) : config(cfg), m(Vec::Zero(n)), v(Vec::Zero(n)) {}
};

// In-place Adam update with bias correction.
inline void adam_update(Eigen::Ref<Vec> params, const Eigen::Ref<const Vec>& grads, AdamState& state) {
  require_dims(grads.size(), params.size(), "adam_step grads");
  if (state.m.size() == 0) {
    state.m = Vec::Zero(params.size());
    state.v = Vec::Zero(params.size());
  }
  require_dims(state.m.size(), params.size(), "adam_step state");
  const auto& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grads;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = c.lr / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  params.array() -= step_size * state.m.array() / ((state.v.array().sqrt() * inv_sqrt_bc2) + c.eps);
}

inline Vec adam_step(const Vec& params, const Vec& grads, AdamState& state) {
  Vec out = params;
  adam_update(out, grads, state);
  return out;
}

}  // namespace dpsr
