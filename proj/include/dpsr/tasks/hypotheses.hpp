#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "dpsr/eval/metrics.hpp"
#include "dpsr/prior/optimize.hpp"

namespace dpsr {

struct PriorStack {
  const NoisePredictor* net = nullptr;
  SchedulePolicy policy;
  PriorConfig config;
};

struct HypothesisOptions {
  Index count = 10;
  Index jobs = 1;
  bool identical_seeds = false;  // every hypothesis reuses stream 0
};

struct Hypothesis {
  std::uint64_t seed = 0;  // stream index under the base rng
  OptimizeResult result;
  double error = std::numeric_limits<double>::quiet_NaN();
};

struct HypothesisStats {
  Index count = 0;
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double apd = 0.0;
};

struct HypothesisSet {
  std::vector<Hypothesis> items;  // ordered by seed index
  HypothesisStats stats;
};

using ErrorFn = std::function<double(const OptimizeResult&)>;

// min / mean / population std of a list of errors.
inline HypothesisStats summarize_errors(const std::vector<double>& e) {
  require(!e.empty(), "summarize_errors: empty list");
  HypothesisStats s;
  s.count = static_cast<Index>(e.size());
  s.min = e.front();
  double sum = 0.0;
  for (double v : e) {
    s.min = std::min(s.min, v);
    sum += v;
  }
  s.mean = sum / static_cast<double>(e.size());
  double sq = 0.0;
  for (double v : e) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(e.size()));
  return s;
}

// Joint features of a multi-frame solution, frames stacked into one column.
inline Vec solution_joint_feature(const ArticulatedModel& model, const Mat& poses) {
  const Mat f = pose_joint_features(model, poses);
  return Eigen::Map<const Vec>(f.data(), f.size());
}

// S independent optimizations of one problem; hypothesis s draws its
// initialization and noise from base.split(s). Results do not depend on jobs.
inline HypothesisSet run_multi_hypothesis(const TaskProblem& problem, const PriorStack& prior,
                                          const HypothesisOptions& opt, const Rng& base, const ErrorFn& error = {},
                                          const ArticulatedModel* model = nullptr) {
  require(opt.count >= 1, "run_multi_hypothesis: need at least one hypothesis");
  require(opt.jobs >= 1, "run_multi_hypothesis: jobs must be >= 1");
  require(prior.net != nullptr, "run_multi_hypothesis: no prior network");
  const auto S = static_cast<std::size_t>(opt.count);
  HypothesisSet out;
  out.items.resize(S);
  std::vector<std::exception_ptr> errors(S);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t s = next++; s < S; s = next++) {
      try {
        Hypothesis& h = out.items[s];
        h.seed = opt.identical_seeds ? 0 : s;
        Rng rng = base.split(h.seed);
        const Mat init = problem.initial_pose(prior.net->stats(), rng);
        h.result = optimize(problem, *prior.net, prior.policy, prior.config, init, problem.initial_aux(), rng);
        if (error) h.error = error(h.result);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  const auto nthreads = static_cast<std::size_t>(std::min<Index>(opt.jobs, opt.count));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<double> errs;
  for (const auto& h : out.items) errs.push_back(error ? h.error : h.result.final_task_loss);
  out.stats = summarize_errors(errs);
  if (model && S >= 2) {
    Mat feats(3 * model->num_joints() * problem.frames(), opt.count);
    for (std::size_t s = 0; s < S; ++s) feats.col(static_cast<Index>(s)) = solution_joint_feature(*model, out.items[s].result.poses);
    out.stats.apd = apd_joints(feats);
  }
  return out;
}

}  // namespace dpsr
