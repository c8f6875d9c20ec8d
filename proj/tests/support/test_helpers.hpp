#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "dpsr/composite/part_split.hpp"
#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/numerics/finite_diff.hpp"
#include "dpsr/synthdata/mixture.hpp"

namespace dpsr::testkit {

// Returns the drawn noise verbatim; lets tests inject a perfect predictor.
class EchoPredictor : public NoisePredictor {
 public:
  EchoPredictor(Index d, const Mat* target) : stats_(NormStats::identity(d)), target_(target) {}
  Index dim() const override { return stats_.dim(); }
  const NormStats& stats() const override { return stats_; }
  const Schedule& schedule() const override { return schedule_; }
  using NoisePredictor::predict;
  Mat predict(const Mat& /*xt*/, const Vec& /*t*/) const override { return *target_; }

 private:
  NormStats stats_;
  Schedule schedule_;
  const Mat* target_;
};

// Closed-form optimal predictor for N(mu, s2 I) data in identity-normalized space.
class GaussianOptimalPredictor : public NoisePredictor {
 public:
  GaussianOptimalPredictor(Vec mu, double s2) : mu_(std::move(mu)), s2_(s2), stats_(NormStats::identity(mu_.size())) {}
  Index dim() const override { return mu_.size(); }
  const NormStats& stats() const override { return stats_; }
  const Schedule& schedule() const override { return schedule_; }
  using NoisePredictor::predict;
  Mat predict(const Mat& xt, const Vec& t) const override {
    Mat out(xt.rows(), xt.cols());
    for (Index j = 0; j < xt.cols(); ++j) {
      const auto [a, s] = schedule_.eval(t[j]);
      out.col(j) = s * (xt.col(j) - a * mu_) / (a * a * s2_ + s * s);
    }
    return out;
  }

 private:
  Vec mu_;
  double s2_;
  NormStats stats_;
  Schedule schedule_;
};

// Small split: body 1, hands 3 + 3, face 1.
inline PartSplit tiny_split() {
  PartSplit s;
  s.blocks = {Block{0, 1}, Block{1, 3}, Block{4, 3}, Block{7, 1}};
  return s;
}

inline std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dpsr_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace dpsr::testkit
