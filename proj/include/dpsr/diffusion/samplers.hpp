#pragma once

#include <cmath>

#include "dpsr/core.hpp"
#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/numerics/rng.hpp"

namespace dpsr {

inline constexpr double kSamplerEndTime = 1e-3;

inline void check_finite(const Mat& x, const char* who, Index step) {
  if (!x.allFinite()) {
    throw NumericError(std::string(who) + ": non-finite state at step " + std::to_string(step));
  }
}

// Euler-Maruyama on the reverse sub-VP SDE from t = 1 to kSamplerEndTime,
// followed by a final one-step denoise. Returns n raw-space samples.
inline Mat sample_em(const NoisePredictor& net, Index steps, Index n, Rng& rng) {
  require(steps >= 1, "sample_em: steps must be >= 1");
  require(n >= 1, "sample_em: sample count must be >= 1");
  const Schedule& s = net.schedule();
  Mat x = gaussian_matrix(rng, net.dim(), n);
  const double dt = (1.0 - kSamplerEndTime) / static_cast<double>(steps);
  for (Index i = 0; i < steps; ++i) {
    const double t = 1.0 - static_cast<double>(i) * dt;
    const Mat eps_hat = net.predict(x, t);
    const double g2 = s.g2(t);
    // reverse drift: f - g^2 score, with score = -eps_hat / sigma_t
    const Mat drift = -0.5 * s.xi(t) * x + (g2 / s.sigma(t)) * eps_hat;
    x -= drift * dt;
    if (i + 1 < steps) x += std::sqrt(g2 * dt) * gaussian_matrix(rng, net.dim(), n);
    check_finite(x, "sample_em", i);
  }
  x = denoise_one_step(net, x, kSamplerEndTime);
  check_finite(x, "sample_em", steps);
  return denormalize(x, net.stats());
}

// Deterministic DDIM on the uniform grid t_start -> 0; the initial state is
// drawn from N(0, I) regardless of t_start.
inline Mat sample_ddim(const NoisePredictor& net, Index steps, Index n, Rng& rng, double t_start = 1.0) {
  require(steps >= 1, "sample_ddim: steps must be >= 1");
  require(n >= 1, "sample_ddim: sample count must be >= 1");
  require(t_start > 0.0 && t_start <= 1.0, "sample_ddim: start time must lie in (0, 1]");
  const Schedule& s = net.schedule();
  Mat x = gaussian_matrix(rng, net.dim(), n);
  for (Index i = 0; i < steps; ++i) {
    const double t = t_start * (1.0 - static_cast<double>(i) / static_cast<double>(steps));
    const double t_next = t_start * (1.0 - static_cast<double>(i + 1) / static_cast<double>(steps));
    const Mat eps_hat = net.predict(x, t);
    const Mat x0_hat = (x - s.sigma(t) * eps_hat) / s.alpha(t);
    x = s.alpha(t_next) * x0_hat + s.sigma(t_next) * eps_hat;
    check_finite(x, "sample_ddim", i);
  }
  return denormalize(x, net.stats());
}

}  // namespace dpsr
