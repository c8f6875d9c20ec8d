#pragma once

#include <cmath>

#include "dpsr/core.hpp"
#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/numerics/rng.hpp"

namespace dpsr {

struct DposerTerm {
  double loss = 0.0;
  Mat grad;     // d loss / d x0, with the denoised target held constant
  Mat eps;      // drawn noise
  Mat eps_hat;  // network prediction at (x_t, t)
  Mat x0_hat;   // one-step denoised estimate
  double alpha = 1.0;
  double sigma = 0.0;
};

// L = w_t ||x0 - sg[x0_hat(t)]||^2 summed over columns, where
// x0_hat = (x_t - sigma_t eps_hat) / alpha_t and x_t = alpha_t x0 + sigma_t eps.
inline DposerTerm dposer_loss_and_grad(const NoisePredictor& net, const Mat& x0, double t, Rng& rng,
                                       double w_t = 1.0) {
  require_dims(x0.rows(), net.dim(), "dposer x0");
  if (!(t > 0.0 && t <= 1.0)) throw UsageError("dposer: t must lie in (0, 1]");
  DposerTerm r;
  const auto [a, s] = net.schedule().eval(t);
  r.alpha = a;
  r.sigma = s;
  r.eps = gaussian_matrix(rng, x0.rows(), x0.cols());
  const Mat xt = a * x0 + s * r.eps;
  r.eps_hat = net.predict(xt, t);
  if (!r.eps_hat.allFinite()) throw NumericError("dposer: non-finite network output");
  r.x0_hat = (xt - s * r.eps_hat) / a;
  const Mat diff = x0 - r.x0_hat;
  r.loss = w_t * diff.squaredNorm();
  r.grad = (2.0 * w_t) * diff;
  return r;
}

}  // namespace dpsr
