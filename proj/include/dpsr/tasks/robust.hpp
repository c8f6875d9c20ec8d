#pragma once

#include <string>

#include "dpsr/core.hpp"

namespace dpsr {

enum class RobustKind { Squared, GemanMcClure };

struct RobustifierConfig {
  RobustKind kind = RobustKind::GemanMcClure;
  double sigma = 100.0;  // pixels

  void validate() const { require(sigma > 0.0, "robustifier: sigma must be positive"); }

  // rho as a function of the squared residual q = r^2.
  double value(double q) const {
    if (kind == RobustKind::Squared) return q;
    const double s2 = sigma * sigma;
    return s2 * q / (s2 + q);
  }

  // d rho / d q
  double derivative(double q) const {
    if (kind == RobustKind::Squared) return 1.0;
    const double s2 = sigma * sigma;
    const double den = s2 + q;
    return s2 * s2 / (den * den);
  }
};

inline RobustKind robust_kind_from_name(const std::string& s) {
  if (s == "squared") return RobustKind::Squared;
  if (s == "geman-mcclure" || s == "gm") return RobustKind::GemanMcClure;
  throw UsageError("unknown robustifier '" + s + "'");
}

inline const char* robust_kind_name(RobustKind k) {
  return k == RobustKind::Squared ? "squared" : "geman-mcclure";
}

}  // namespace dpsr
