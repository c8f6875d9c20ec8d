#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/numerics/adam.hpp"
#include "dpsr/prior/dposer.hpp"
#include "dpsr/prior/policy.hpp"

namespace dpsr {

// One inverse problem y = A(x0) + n. Poses are raw-space columns (one per
// frame); auxiliary variables (shape, global transforms, ...) are a flat vector.
class TaskProblem {
 public:
  virtual ~TaskProblem() = default;
  virtual Index pose_dim() const = 0;
  virtual Index frames() const { return 1; }
  virtual Index aux_dim() const { return 0; }
  virtual Vec initial_aux() const { return Vec::Zero(aux_dim()); }
  // Starting point in normalized space; unknown entries come from N(0, I).
  virtual Mat initial_pose(const NormStats& /*stats*/, Rng& rng) const {
    return gaussian_matrix(rng, pose_dim(), frames());
  }
  // Task loss and, when requested, its gradients w.r.t. raw poses and aux.
  virtual double loss_and_grad(const Mat& poses, const Vec& aux, Mat* grad_poses, Vec* grad_aux) const = 0;

  double loss(const Mat& poses, const Vec& aux) const { return loss_and_grad(poses, aux, nullptr, nullptr); }
};

class NonFiniteLoss : public NumericError {
 public:
  explicit NonFiniteLoss(Index iter)
      : NumericError("optimize: non-finite loss at iteration " + std::to_string(iter)), iter_(iter) {}
  Index iteration() const { return iter_; }

 private:
  Index iter_;
};

struct PriorConfig {
  double lambda_reg = 1.0;
  double w_t = 1.0;
  double lr = 0.05;
  double lr_final = -1.0;  // < 0: constant lr; otherwise linear decay to this value
  Index iterations = 500;
  std::uint64_t seed = 0;

  double lr_at(Index iter) const {
    if (lr_final < 0.0 || iterations <= 1) return lr;
    const double f = static_cast<double>(iter) / static_cast<double>(iterations - 1);
    return lr + f * (lr_final - lr);
  }

  void validate() const {
    require(lambda_reg >= 0.0, "prior config: lambda_reg must be >= 0");
    require(w_t >= 0.0, "prior config: w_t must be >= 0");
    require(lr > 0.0, "prior config: lr must be positive");
    require(iterations >= 1, "prior config: iterations must be >= 1");
  }
};

struct TraceRow {
  Index iter = 0;
  double t = 0.0;
  double task = 0.0;
  double dposer = 0.0;
  double total = 0.0;
};

struct OptimizeResult {
  Mat x0;    // normalized poses
  Mat poses; // raw poses
  Vec aux;
  std::vector<TraceRow> trace;
  double final_task_loss = 0.0;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iter,t,L_task,L_DPoser,L_total\n";
  os.precision(17);
  for (const auto& r : trace) os << r.iter << ',' << r.t << ',' << r.task << ',' << r.dposer << ',' << r.total << '\n';
}

// Test-time optimization: every iteration schedules t, draws fresh noise,
// adds lambda_reg * L_DPoser to the task loss, and takes an Adam step on the
// normalized pose and the auxiliary variables.
inline OptimizeResult optimize(const TaskProblem& problem, const NoisePredictor& net, const SchedulePolicy& policy,
                               const PriorConfig& cfg, const Mat& init, const Vec& aux_init, Rng& rng) {
  cfg.validate();
  policy.validate();
  require(policy.iterations == cfg.iterations, "optimize: policy and config disagree on iteration count");
  require_dims(init.rows(), net.dim(), "optimize init");
  require_dims(problem.pose_dim(), net.dim(), "optimize problem pose dimension");
  require_dims(init.cols(), problem.frames(), "optimize init frames");
  require_dims(aux_init.size(), problem.aux_dim(), "optimize aux");

  const NormStats& stats = net.stats();
  const Index d = init.rows(), nf = init.cols(), np = d * nf;
  Vec params(np + aux_init.size());
  params.head(np) = Eigen::Map<const Vec>(init.data(), np);
  params.tail(aux_init.size()) = aux_init;
  AdamState adam(params.size(), AdamConfig{cfg.lr});

  OptimizeResult out;
  out.trace.reserve(static_cast<std::size_t>(cfg.iterations));
  Mat gpose;
  Vec gaux;
  Vec grad(params.size());
  for (Index it = 0; it < cfg.iterations; ++it) {
    const double t = schedule_timestep(policy, it, rng);
    const Eigen::Map<const Mat> x0(params.data(), d, nf);
    const Vec aux = params.tail(aux_init.size());
    const Mat raw = denormalize(x0, stats);
    const double task = problem.loss_and_grad(raw, aux, &gpose, &gaux);
    // chain rule through the normalization
    Mat gx = gpose.array().colwise() * stats.std.array();
    double reg = 0.0;
    if (cfg.lambda_reg > 0.0) {
      const DposerTerm term = dposer_loss_and_grad(net, x0, t, rng, cfg.w_t);
      reg = term.loss;
      gx += cfg.lambda_reg * term.grad;
    }
    const double total = task + cfg.lambda_reg * reg;
    if (!std::isfinite(total) || !gx.allFinite() || !gaux.allFinite()) throw NonFiniteLoss(it);
    out.trace.push_back({it, t, task, reg, total});
    grad.head(np) = Eigen::Map<const Vec>(gx.data(), np);
    grad.tail(aux_init.size()) = gaux;
    adam.config.lr = cfg.lr_at(it);
    adam_update(params, grad, adam);
  }
  out.x0 = Eigen::Map<const Mat>(params.data(), d, nf);
  out.aux = params.tail(aux_init.size());
  out.poses = denormalize(out.x0, stats);
  out.final_task_loss = problem.loss(out.poses, out.aux);
  return out;
}

}  // namespace dpsr
