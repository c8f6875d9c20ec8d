#include <gtest/gtest.h>

#include <cmath>

#include "dpsr/synthdata/dataset.hpp"
#include "dpsr/synthdata/oracle.hpp"
#include "dpsr/tasks/hypotheses.hpp"
#include "dpsr/tasks/instances.hpp"
#include "support/test_helpers.hpp"

using namespace dpsr;

namespace {

const ArticulatedModel& model() {
  static const ArticulatedModel m = default_model();
  return m;
}

Vec random_pose(Rng& rng, double scale = 0.3) { return scale * gaussian_sample(rng, model().pose_dim()); }

// Relative FD check of a problem's pose and aux gradients at (poses, aux).
void check_problem_gradient(const TaskProblem& p, const Mat& poses, const Vec& aux, double tol = 1e-5) {
  Mat gp;
  Vec ga;
  p.loss_and_grad(poses, aux, &gp, &ga);
  const Index np = poses.size();
  Vec x(np + aux.size());
  x.head(np) = Eigen::Map<const Vec>(poses.data(), np);
  x.tail(aux.size()) = aux;
  auto f = [&](const Vec& v) {
    const Eigen::Map<const Mat> pm(v.data(), poses.rows(), poses.cols());
    return p.loss(pm, v.tail(aux.size()));
  };
  Vec g(x.size());
  g.head(np) = Eigen::Map<const Vec>(gp.data(), np);
  g.tail(aux.size()) = ga;
  EXPECT_LT(relative_error(g, finite_diff_grad(f, x), 1e-6), tol);
}

}  // namespace

TEST(Robust, GemanMcClureLimitsAndDerivative) {
  RobustifierConfig gm;
  EXPECT_EQ(gm.value(0.0), 0.0);
  EXPECT_NEAR(gm.value(1e12), 1e4, 1e-2);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double q = std::pow(10.0, rng.uniform(-2, 5));
    const double h = 1e-5 * std::max(1.0, q);
    const double fd = (gm.value(q + h) - gm.value(q - h)) / (2 * h);
    EXPECT_LT(std::abs(fd - gm.derivative(q)) / std::max(1e-8, std::abs(fd)), 1e-5);
  }
  RobustifierConfig bad{RobustKind::GemanMcClure, 0.0};
  EXPECT_THROW(bad.validate(), UsageError);
}

TEST(Completion, LossExamples) {
  Rng rng(2);
  const Vec y = gaussian_sample(rng, 6);
  EXPECT_EQ(completion_loss(y, MaskSpec(6, true), y), 0.0);
  EXPECT_EQ(completion_loss(gaussian_sample(rng, 6), MaskSpec(6, false), Vec()), 0.0);
  EXPECT_THROW(completion_loss(y, MaskSpec(6, true), Vec::Zero(5)), UsageError);
}

TEST(Gradients, AllTaskLossesMatchFiniteDifferences) {
  Rng rng(3);
  const Index d = model().pose_dim();
  const MixtureSpec spec = make_default_mixture(model());
  for (int trial = 0; trial < 20; ++trial) {
    // completion
    MaskSpec mask(static_cast<std::size_t>(d));
    for (auto&& b : mask) b = rng.uniform() < 0.5;
    const Vec full = random_pose(rng);
    check_problem_gradient(CompletionProblem(mask, observed_values(full, mask)), Mat(random_pose(rng)), Vec());

    // inverse kinematics with noisy, partially observed joints and a non-zero shape
    IkInstance ik = make_ik_instance(model(), spec, trial % 2 == 0, 0.04, rng);
    ik.shape = 0.1 * gaussian_sample(rng, model().shape_dim());
    check_problem_gradient(ik.problem(model()), Mat(random_pose(rng)), Vec());

    // 2D fitting, both robustifiers, aux = shape + orient + translation
    Fit2dGenOptions opt;
    Fit2dInstance f2 = make_fit2d_instance(model(), spec, Vec::Zero(d), opt, rng);
    f2.shape_weight = rng.uniform(0.0, 2.0);
    f2.robust.sigma = rng.uniform(20.0, 150.0);
    if (trial % 3 == 0) f2.robust.kind = RobustKind::Squared;
    const Fit2dProblem fp = f2.problem(model());
    Vec aux = fp.initial_aux();
    aux.head(model().shape_dim()) = 0.05 * gaussian_sample(rng, model().shape_dim());
    check_problem_gradient(fp, Mat(random_pose(rng, 0.2)), aux);

    // motion
    const MotionInstance mi = make_motion_instance(model(), spec, 4, 0.04, 0.05, rng);
    const MotionProblem mp = mi.problem(model());
    check_problem_gradient(mp, 0.3 * gaussian_matrix(rng, d, 4), 0.1 * gaussian_sample(rng, mp.aux_dim()));
  }
}

TEST(Ik, TruthGivesZeroAndNeedsKnownJoint) {
  Rng rng(4);
  const MixtureSpec spec = make_default_mixture(model());
  const IkInstance ik = make_ik_instance(model(), spec, false, 0.0, rng);
  EXPECT_NEAR(ik.problem(model()).loss(Mat(ik.gt), Vec()), 0.0, 1e-24);
  EXPECT_THROW(IkProblem(model(), ik.shape, ik.joints, MaskSpec(26, false)), UsageError);
  const MaskSpec leaves = leaf_joint_mask(model());
  EXPECT_FALSE(leaves[0]);
  EXPECT_FALSE(leaves[4]);  // head carries the face joints
  EXPECT_TRUE(leaves[14]);  // index fingertip
  EXPECT_TRUE(leaves[23]);  // jaw
  EXPECT_FALSE(leaves[7]);  // wrist has a hand below it
}

TEST(Ik, EndEffectorsRecoveredWithoutPrior) {
  Rng rng(5);
  const MixtureSpec spec = make_default_mixture(model());
  const IkInstance ik = make_ik_instance(model(), spec, true, 0.0, rng);
  const IkProblem p = ik.problem(model());
  Rng nr(1);
  const NoiseNet net(NetConfig{model().pose_dim(), 8, 1, 8}, NormStats::identity(model().pose_dim()), Schedule{}, nr);
  PriorConfig cfg;
  cfg.lambda_reg = 0.0;
  cfg.iterations = 3000;
  cfg.lr = 0.01;
  const auto res =
      optimize(p, net, SchedulePolicy::truncated(0.15, 0.05, 3000), cfg, Mat::Zero(model().pose_dim(), 1), Vec(), rng);
  const Mat3X got = forward_kinematics(model(), res.poses.col(0));
  double worst = 0.0;
  for (Index j = 0; j < model().num_joints(); ++j)
    if (ik.joint_mask[static_cast<std::size_t>(j)]) worst = std::max(worst, (got.col(j) - ik.joints.col(j)).norm());
  EXPECT_LT(worst, 1e-3);
  // angles need not match the truth
  EXPECT_GT((res.poses.col(0) - ik.gt).norm(), 1e-2);
}

TEST(Fit2d, ZeroConfidenceIgnoredAndDepthError) {
  Rng rng(6);
  const MixtureSpec spec = make_default_mixture(model());
  Fit2dInstance f2 = make_fit2d_instance(model(), spec, Vec::Zero(model().pose_dim()), {}, rng);
  Mat2X moved = f2.keypoints;
  for (Index j = 0; j < moved.cols(); ++j)
    if (f2.confidence[j] == 0.0) moved.col(j) += Eigen::Vector2d(500.0, -300.0);
  const PoseParams p = PoseParams::from_vector(model(), f2.gt);
  EXPECT_EQ(fit2d_loss(model(), p, f2.gt_shape, f2.camera, f2.keypoints, f2.confidence, f2.robust),
            fit2d_loss(model(), p, f2.gt_shape, f2.camera, moved, f2.confidence, f2.robust));
  Camera behind = f2.camera;
  behind.translation.z() = -5.0;
  EXPECT_THROW(fit2d_loss(model(), p, f2.gt_shape, behind, f2.keypoints, f2.confidence, f2.robust), NonPositiveDepth);
  Vec neg = f2.confidence;
  neg[0] = -1.0;
  EXPECT_THROW(fit2d_loss(model(), p, f2.gt_shape, f2.camera, f2.keypoints, neg, f2.robust), UsageError);
}

TEST(Motion, LossExamples) {
  Rng rng(7);
  const MixtureSpec spec = make_default_mixture(model());
  const MotionInstance clean = make_motion_instance(model(), spec, 5, 0.0, 0.05, rng);
  const MotionLoss l = motion_denoise_loss(model(), clean.gt, Mat(), clean.observed, clean.joint_mask, 0.5);
  EXPECT_NEAR(l.obs, 0.0, 1e-24);
  double energy = 0.0;
  for (Index f = 1; f < 5; ++f) energy += (clean.observed[f - 1] - clean.observed[f]).squaredNorm();
  EXPECT_NEAR(l.temp, energy, 1e-12);
  const Mat constant = clean.gt.col(0).replicate(1, 5);
  EXPECT_EQ(motion_denoise_loss(model(), constant, Mat(), clean.observed, clean.joint_mask, 0.5).temp, 0.0);
  std::vector<Mat3X> short_obs(clean.observed.begin(), clean.observed.begin() + 4);
  EXPECT_THROW(motion_denoise_loss(model(), clean.gt, Mat(), short_obs, clean.joint_mask, 0.5), UsageError);
  EXPECT_THROW(motion_denoise_loss(model(), clean.gt.leftCols(1), Mat(), {clean.observed[0]}, clean.joint_mask, 0.5),
               UsageError);
}

TEST(Instances, JsonRoundTrip) {
  Rng rng(8);
  const MixtureSpec spec = make_default_mixture(model());
  const auto c = make_completion_instance(spec, {PartBlock::LeftHand}, rng);
  const auto c2 = CompletionInstance::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(c2.mask, c.mask);
  EXPECT_EQ(c2.observed, c.observed);
  EXPECT_EQ(c2.gt, c.gt);
  const auto ik = make_ik_instance(model(), spec, true, 0.01, rng);
  const auto ik2 = IkInstance::from_json(nlohmann::json::parse(ik.to_json().dump()));
  EXPECT_EQ(ik2.joints, ik.joints);
  EXPECT_EQ(ik2.joint_mask, ik.joint_mask);
  const auto f = make_fit2d_instance(model(), spec, Vec::Zero(model().pose_dim()), {}, rng);
  const auto f2 = Fit2dInstance::from_json(nlohmann::json::parse(f.to_json().dump()));
  EXPECT_EQ(f2.keypoints, f.keypoints);
  EXPECT_EQ(f2.camera.translation, f.camera.translation);
  EXPECT_EQ(f2.confidence, f.confidence);
  EXPECT_EQ(f2.gt_shape, f.gt_shape);
  const auto m = make_motion_instance(model(), spec, 3, 0.04, 0.05, rng);
  const auto m2 = MotionInstance::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(m2.gt, m.gt);
  EXPECT_EQ(m2.observed[2], m.observed[2]);
  // 30% of 26 joints occluded
  EXPECT_EQ((f.confidence.array() == 0.0).count(), 8);
}

namespace {

struct MultiFixture {
  MixtureSpec spec = make_default_mixture(model());
  Dataset train = generate_splits(spec, 4000, 0, 0, 9).train;
  MixtureOptimalPredictor opt{spec, train.stats, Schedule{}};
};

}  // namespace

TEST(MultiHypothesis, StatsAndApd) {
  MultiFixture fx;
  Rng rng(10);
  const auto inst = make_completion_instance(fx.spec, {PartBlock::LeftHand}, rng);
  const CompletionProblem p = inst.problem();
  PriorStack stack{&fx.opt, SchedulePolicy::truncated(0.15, 0.05, 60), {}};
  stack.config.iterations = 60;
  const ErrorFn err = [&](const OptimizeResult& r) { return joint_error(model(), r.poses, Mat(inst.gt)); };

  const auto one = run_multi_hypothesis(p, stack, {1, 1, false}, Rng(3), err, &model());
  EXPECT_EQ(one.stats.min, one.stats.mean);
  EXPECT_EQ(one.stats.std, 0.0);

  const auto same = run_multi_hypothesis(p, stack, {4, 1, true}, Rng(3), err, &model());
  EXPECT_EQ(same.stats.apd, 0.0);

  const auto a = run_multi_hypothesis(p, stack, {6, 1, false}, Rng(3), err, &model());
  const auto b = run_multi_hypothesis(p, stack, {6, 3, false}, Rng(3), err, &model());
  EXPECT_GT(a.stats.apd, 0.0);
  EXPECT_LE(a.stats.min, a.stats.mean);
  for (std::size_t s = 0; s < 6; ++s) {
    EXPECT_EQ(a.items[s].seed, s);
    EXPECT_EQ(a.items[s].result.poses, b.items[s].result.poses);
  }
  EXPECT_THROW(run_multi_hypothesis(p, stack, {0, 1, false}, Rng(3)), UsageError);
}
