#pragma once

#include <cmath>

#include "dpsr/core.hpp"

namespace dpsr {

// Per-dimension z-score statistics. Columns of a data matrix are samples.
struct NormStats {
  Vec mean;
  Vec std;

  Index dim() const { return mean.size(); }

  static NormStats identity(Index d) { return {Vec::Zero(d), Vec::Ones(d)}; }

  void validate() const {
    require(mean.size() == std.size(), "normalization stats: size mismatch");
    require(mean.allFinite() && std.allFinite() && (std.array() > 0.0).all(),
            "normalization stats: std must be positive and finite");
  }
};

// Population statistics; degenerate dimensions get unit scale.
inline NormStats compute_stats(const Mat& data) {
  require(data.cols() >= 1, "compute_stats: empty data");
  NormStats s;
  s.mean = data.rowwise().mean();
  s.std = ((data.colwise() - s.mean).array().square().rowwise().sum() / static_cast<double>(data.cols())).sqrt();
  for (Index i = 0; i < s.std.size(); ++i)
    if (!(s.std[i] > 1e-12)) s.std[i] = 1.0;
  return s;
}

inline Mat normalize(const Mat& x, const NormStats& s) {
  require_dims(x.rows(), s.dim(), "normalize");
  return (x.colwise() - s.mean).array().colwise() / s.std.array();
}

inline Mat denormalize(const Mat& x, const NormStats& s) {
  require_dims(x.rows(), s.dim(), "denormalize");
  return (x.array().colwise() * s.std.array()).matrix().colwise() + s.mean;
}

}  // namespace dpsr
