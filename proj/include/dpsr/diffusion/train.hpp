#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/numerics/adam.hpp"
#include "dpsr/numerics/rng.hpp"

namespace dpsr {

struct TrainConfig {
  Index batch_size = 256;
  Index iterations = 5000;
  double lr = 1e-3;
  double lr_final = 1e-3;  // linear decay from lr to lr_final
  double t_lo = 1e-3;
  double t_hi = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(batch_size >= 1, "train: batch size must be positive");
    require(iterations >= 0, "train: negative iteration count");
    require(lr > 0.0 && lr_final > 0.0, "train: learning rate must be positive");
    require(0.0 <= t_lo && t_lo < t_hi && t_hi <= 1.0, "train: require 0 <= t_lo < t_hi <= 1");
  }

  double lr_at(Index iter) const {
    if (iterations <= 1) return lr;
    const double f = static_cast<double>(iter) / static_cast<double>(iterations - 1);
    return lr + f * (lr_final - lr);
  }
};

// One drawn DSM minibatch: times, noise, and the perturbed inputs.
struct DsmDraw {
  Vec t;
  Vec weight;  // w(t) = sigma_t^2
  Mat eps;
  Mat xt;
};

inline DsmDraw draw_dsm(const Schedule& s, const Mat& x0, double t_lo, double t_hi, Rng& rng) {
  DsmDraw d;
  const Index n = x0.cols();
  d.t.resize(n);
  d.weight.resize(n);
  d.eps = gaussian_matrix(rng, x0.rows(), n);
  d.xt.resize(x0.rows(), n);
  for (Index i = 0; i < n; ++i) {
    const double t = rng.uniform(t_lo, t_hi);
    const double a = s.alpha(t), sg = s.sigma(t);
    d.t[i] = t;
    d.weight[i] = sg * sg;
    d.xt.col(i) = a * x0.col(i) + sg * d.eps.col(i);
  }
  return d;
}

// mean_i w(t_i) ||eps_i - pred_i||^2
inline double dsm_loss(const Mat& pred, const DsmDraw& d) {
  return ((pred - d.eps).colwise().squaredNorm().transpose().cwiseProduct(d.weight)).sum() /
         static_cast<double>(d.eps.cols());
}

inline double dsm_loss(const NoisePredictor& net, const DsmDraw& d) { return dsm_loss(net.predict(d.xt, d.t), d); }

inline std::string describe_times(const Vec& t) {
  std::ostringstream os;
  os << "t=[";
  for (Index i = 0; i < std::min<Index>(t.size(), 8); ++i) os << (i ? "," : "") << t[i];
  if (t.size() > 8) os << ",...";
  os << "]";
  return os.str();
}

// Loss and parameter gradient for a fixed draw.
inline double dsm_loss_and_grad(const NoiseNet& net, const DsmDraw& d, Vec& grad) {
  MlpTape tape;
  const Mat pred = net.forward(d.xt, d.t, &tape);
  const double loss = dsm_loss(pred, d);
  const Mat dy = (2.0 / static_cast<double>(d.eps.cols())) * (pred - d.eps) * d.weight.asDiagonal();
  grad = net.backward(tape, dy);
  return loss;
}

// One optimizer step on a normalized batch (columns are samples).
inline double train_step(NoiseNet& net, const Mat& batch, const TrainConfig& cfg, Rng& rng, AdamState& adam,
                         Index iteration = 0) {
  require(batch.cols() >= 1, "train_step: empty batch");
  require_dims(batch.rows(), net.dim(), "train_step batch");
  const DsmDraw d = draw_dsm(net.schedule(), batch, cfg.t_lo, cfg.t_hi, rng);
  Vec grad;
  const double loss = dsm_loss_and_grad(net, d, grad);
  if (!std::isfinite(loss) || !grad.allFinite()) {
    throw NumericError("train_step: non-finite loss at iteration " + std::to_string(iteration) + ", " +
                       describe_times(d.t));
  }
  adam.config.lr = cfg.lr_at(iteration);
  adam_update(net.params(), grad, adam);
  return loss;
}

inline Mat gather_columns(const Mat& data, const std::vector<Index>& idx) {
  Mat out(data.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Index>(i)) = data.col(idx[i]);
  return out;
}

// Minibatch training on a normalized dataset; returns the per-step losses.
inline std::vector<double> train(NoiseNet& net, const Mat& data, const TrainConfig& cfg) {
  cfg.validate();
  require(data.cols() >= 1, "train: empty dataset");
  Rng rng(cfg.seed);
  AdamState adam(net.params().size(), AdamConfig{cfg.lr});
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(cfg.iterations));
  std::vector<Index> idx(static_cast<std::size_t>(cfg.batch_size));
  for (Index it = 0; it < cfg.iterations; ++it) {
    for (auto& i : idx) i = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(data.cols()));
    losses.push_back(train_step(net, gather_columns(data, idx), cfg, rng, adam, it));
  }
  return losses;
}

}  // namespace dpsr
