#pragma once

#include <cmath>
#include <utility>

#include "dpsr/core.hpp"

namespace dpsr {

// Sub-VP SDE with linear noise scale xi(t) = xi_min + t (xi_max - xi_min):
//   alpha_t = exp(-1/2 int_0^t xi),  sigma_t = 1 - exp(-int_0^t xi).
struct Schedule {
  double xi_min = 0.1;
  double xi_max = 20.0;

  double xi(double t) const { return xi_min + t * (xi_max - xi_min); }
  double integral(double t) const { return xi_min * t + 0.5 * (xi_max - xi_min) * t * t; }
  double alpha(double t) const { return std::exp(-0.5 * integral(t)); }
  double sigma(double t) const { return -std::expm1(-integral(t)); }

  // Diffusion coefficient squared of the forward SDE.
  double g2(double t) const { return xi(t) * -std::expm1(-2.0 * integral(t)); }

  std::pair<double, double> eval(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("schedule time must lie in [0, 1]");
    return {alpha(t), sigma(t)};
  }

  void validate() const {
    require(xi_min > 0.0 && xi_max > xi_min, "schedule: require 0 < xi_min < xi_max");
  }
};

// x_t = alpha_t x0 + sigma_t eps.
inline Vec perturb(const Schedule& s, const Vec& x0, double t, const Vec& eps) {
  require_dims(eps.size(), x0.size(), "perturb noise");
  const auto [a, sg] = s.eval(t);
  return a * x0 + sg * eps;
}

}  // namespace dpsr
