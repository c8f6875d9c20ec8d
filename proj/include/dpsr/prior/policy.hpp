#pragma once

#include <string>

#include "dpsr/core.hpp"
#include "dpsr/numerics/rng.hpp"

namespace dpsr {

enum class ScheduleMode { Truncated, Uniform, Fixed, Random };

// Smallest diffusion time any policy may schedule.
inline constexpr double kMinScheduleTime = 1e-3;

inline const char* mode_name(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::Truncated: return "truncated";
    case ScheduleMode::Uniform: return "uniform";
    case ScheduleMode::Fixed: return "fixed";
    case ScheduleMode::Random: return "random";
  }
  return "truncated";
}

inline ScheduleMode mode_from_name(const std::string& s) {
  if (s == "truncated") return ScheduleMode::Truncated;
  if (s == "uniform") return ScheduleMode::Uniform;
  if (s == "fixed") return ScheduleMode::Fixed;
  if (s == "random") return ScheduleMode::Random;
  throw UsageError("unknown schedule mode '" + s + "'");
}

struct SchedulePolicy {
  ScheduleMode mode = ScheduleMode::Truncated;
  double t_max = 0.15;
  double t_min = 0.05;
  Index iterations = 500;

  static SchedulePolicy truncated(double t_max, double t_min, Index n) { return {ScheduleMode::Truncated, t_max, t_min, n}; }
  static SchedulePolicy uniform(Index n) { return {ScheduleMode::Uniform, 1.0, kMinScheduleTime, n}; }
  static SchedulePolicy fixed(double t, Index n) { return {ScheduleMode::Fixed, t, t, n}; }
  static SchedulePolicy random(double t_max, double t_min, Index n) { return {ScheduleMode::Random, t_max, t_min, n}; }

  void validate() const {
    require(iterations >= 1, "schedule policy: iterations must be >= 1");
    require(t_max <= 1.0 && t_max >= t_min && t_min >= kMinScheduleTime,
            "schedule policy: require 1 >= t_max >= t_min >= minimum time");
    if (mode == ScheduleMode::Fixed) require(t_max == t_min, "schedule policy: fixed mode needs t_max == t_min");
    if (mode == ScheduleMode::Uniform) {
      require(t_max == 1.0 && t_min == kMinScheduleTime, "schedule policy: uniform mode spans [1, minimum time]");
    }
  }
};

// Diffusion time for optimization step `iter`:
//   truncated/uniform: t_max - (t_max - t_min) iter / (N - 1)
//   fixed: t_max;  random: U[t_min, t_max]
inline double schedule_timestep(const SchedulePolicy& p, Index iter, Rng& rng) {
  p.validate();
  require(iter >= 0 && iter < p.iterations, "schedule_timestep: iteration out of range");
  switch (p.mode) {
    case ScheduleMode::Truncated:
    case ScheduleMode::Uniform:
      if (p.iterations == 1) return p.t_max;
      return p.t_max - (p.t_max - p.t_min) * static_cast<double>(iter) / static_cast<double>(p.iterations - 1);
    case ScheduleMode::Fixed:
      return p.t_max;
    case ScheduleMode::Random:
      return rng.uniform(p.t_min, p.t_max);
  }
  return p.t_max;
}

}  // namespace dpsr
