#pragma once

#include <cmath>
#include <functional>

#include "dpsr/core.hpp"

namespace dpsr {

// Central-difference gradient of a scalar function.
inline Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  require(h > 0.0, "finite_diff_grad: step must be positive");
  Vec g(x.size());
  Vec xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " + std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor); symmetric in its arguments.
inline double relative_error(const Vec& a, const Vec& b, double floor = 1e-8) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

}  // namespace dpsr
