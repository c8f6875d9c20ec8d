#pragma once

#include "dpsr/core.hpp"
#include "dpsr/diffusion/mlp.hpp"
#include "dpsr/diffusion/schedule.hpp"
#include "dpsr/synthdata/normalize.hpp"

namespace dpsr {

// Anything that predicts the injected noise eps from (x_t, t) in normalized
// space. The implied score is -prediction / sigma_t everywhere.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Index dim() const = 0;
  // xt: dim x n, t: n times in (0, 1].
  virtual Mat predict(const Mat& xt, const Vec& t) const = 0;
  virtual const NormStats& stats() const = 0;
  virtual const Schedule& schedule() const = 0;

  Mat predict(const Mat& xt, double t) const { return predict(xt, Vec::Constant(xt.cols(), t)); }
};

struct NetConfig {
  Index dim = 0;
  Index hidden = 256;
  Index blocks = 2;
  Index emb_dim = 64;

  MlpShape mlp_shape() const { return {dim, dim, hidden, blocks, emb_dim}; }
};

class NoiseNet : public NoisePredictor {
 public:
  NoiseNet() = default;
  NoiseNet(const NetConfig& cfg, const NormStats& stats, const Schedule& schedule, Rng& rng)
      : config_(cfg), mlp_(cfg.mlp_shape(), rng), stats_(stats), schedule_(schedule) {
    check();
  }
  NoiseNet(const NetConfig& cfg, const NormStats& stats, const Schedule& schedule, const Vec& params)
      : config_(cfg), mlp_(cfg.mlp_shape()), stats_(stats), schedule_(schedule) {
    mlp_.set_params(params);
    check();
  }

  Index dim() const override { return config_.dim; }
  const NormStats& stats() const override { return stats_; }
  const Schedule& schedule() const override { return schedule_; }
  const NetConfig& config() const { return config_; }

  Mat predict(const Mat& xt, const Vec& t) const override { return mlp_.forward(xt, t); }
  using NoisePredictor::predict;

  Mat forward(const Mat& xt, const Vec& t, MlpTape* tape) const { return mlp_.forward(xt, t, tape); }
  Vec backward(const MlpTape& tape, const Mat& dy) const { return mlp_.backward(tape, dy); }
  Mat features(const Mat& xt, const Vec& t) const { return mlp_.features(xt, t); }

  const Vec& params() const { return mlp_.params(); }
  Vec& params() { return mlp_.params(); }
  const ResidualMlp& mlp() const { return mlp_; }

 private:
  void check() const {
    require(config_.dim >= 1, "noise net: dimension must be positive");
    require_dims(stats_.dim(), config_.dim, "noise net normalization stats");
    stats_.validate();
    schedule_.validate();
  }

  NetConfig config_;
  ResidualMlp mlp_;
  NormStats stats_;
  Schedule schedule_;
};

inline Vec net_forward(const NoisePredictor& net, const Vec& xt, double t) {
  require_dims(xt.size(), net.dim(), "net_forward input");
  return net.predict(Mat(xt), t).col(0);
}

// x0_hat = (x_t - sigma_t eps_hat) / alpha_t, column-wise.
inline Mat denoise_one_step(const NoisePredictor& net, const Mat& xt, double t) {
  if (!(t > 0.0 && t <= 1.0)) throw UsageError("denoise_one_step: t must lie in (0, 1]");
  const auto [a, s] = net.schedule().eval(t);
  return (xt - s * net.predict(xt, t)) / a;
}

}  // namespace dpsr
