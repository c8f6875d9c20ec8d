#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dpsr/eval/metrics.hpp"
#include "dpsr/kinematics/rotation.hpp"
#include "support/test_helpers.hpp"

using namespace dpsr;

namespace {
Mat3X cloud(Rng& rng, Index n) { return gaussian_matrix(rng, 3, n); }
}  // namespace

TEST(Procrustes, IdentityAndExactFit) {
  Rng rng(1);
  const Mat3X x = cloud(rng, 20);
  const auto same = procrustes_align(x, x);
  EXPECT_NEAR(same.transform.scale, 1.0, 1e-12);
  EXPECT_LT((same.transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(same.transform.translation.norm(), 1e-12);
  for (int i = 0; i < 20; ++i) {
    const Mat3 r0 = rodrigues(Vec3(rng.normal(), rng.normal(), rng.normal()));
    const Vec3 t0(rng.normal(), rng.normal(), rng.normal());
    const Mat3X y = (2.0 * r0 * x).colwise() + t0;
    const auto r = procrustes_align(x, y);
    EXPECT_NEAR(r.transform.scale, 2.0, 1e-10);
    EXPECT_LT((r.transform.rotation - r0).norm(), 1e-10);
    EXPECT_LT((r.transform.translation - t0).norm(), 1e-10);
    EXPECT_LT((r.aligned - y).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Procrustes, ReflectionGuardAndDegenerate) {
  Rng rng(2);
  const Mat3X x = cloud(rng, 10);
  Mat3X y = x;
  y.row(0) *= -1.0;  // mirror image
  const auto r = procrustes_align(x, y);
  EXPECT_NEAR(r.transform.rotation.determinant(), 1.0, 1e-12);
  Mat3X line(3, 5);
  for (Index i = 0; i < 5; ++i) line.col(i) = Vec3(i, 2.0 * i, -i);
  EXPECT_THROW(procrustes_align(line, line), UsageError);
  EXPECT_THROW(procrustes_align(x.leftCols(2), y.leftCols(2)), UsageError);
}

TEST(PositionError, Examples) {
  Rng rng(3);
  const Mat3X gt = cloud(rng, 30);
  EXPECT_EQ(position_error(gt, gt), 0.0);
  const Mat3X shifted = gt.colwise() + Vec3(0.3, 0, 0);
  EXPECT_NEAR(position_error(shifted, gt), 0.3, 1e-12);
  EXPECT_NEAR(position_error(shifted, gt, true), 0.0, 1e-12);
  EXPECT_THROW(position_error(gt, gt.leftCols(29)), UsageError);
  for (int i = 0; i < 100; ++i) {
    const Mat3X pred = gt + 0.2 * cloud(rng, 30);
    EXPECT_LE(position_error(pred, gt, true), position_error(pred, gt) + 1e-12);
  }
}

TEST(PositionError, ChiMeanMonteCarlo) {
  Rng rng(4);
  const double s = 0.05;
  const Mat3X gt = Mat3X::Zero(3, 200000);
  const Mat3X pred = s * cloud(rng, 200000);
  // chi distribution with 3 degrees of freedom: E||N(0, s^2 I3)|| = s sqrt(2) Gamma(2) / Gamma(1.5)
  const double want = s * std::sqrt(2.0) * std::tgamma(2.0) / std::tgamma(1.5);
  EXPECT_NEAR(want, s * std::sqrt(8.0 / std::numbers::pi), 1e-15);
  EXPECT_LT(std::abs(position_error(pred, gt) - want) / want, 0.005);
}

TEST(Apd, Examples) {
  const ArticulatedModel model = default_model();
  Rng rng(5);
  const Vec pose = 0.2 * gaussian_sample(rng, model.pose_dim());
  EXPECT_EQ(apd(pose.replicate(1, 3), model), 0.0);
  Mat j = pose_joint_features(model, pose.replicate(1, 2));
  for (Index i = 0; i < j.rows(); i += 3) j(i + 1, 1) += 0.25;  // every joint moved by 0.25
  EXPECT_NEAR(apd_joints(j), 0.25, 1e-12);
  const Mat sols = 0.3 * gaussian_matrix(rng, model.pose_dim(), 5);
  Mat perm = sols;
  perm.col(0).swap(perm.col(3));
  EXPECT_NEAR(apd(sols, model), apd(perm, model), 1e-14);
  EXPECT_THROW(apd(sols.leftCols(1), model), UsageError);
}

TEST(Dnn, Examples) {
  const ArticulatedModel model = default_model();
  Rng rng(6);
  const Mat train = 0.3 * gaussian_matrix(rng, model.pose_dim(), 40);
  EXPECT_EQ(d_nn(train.leftCols(7), train, model), 0.0);
  const Mat far = Mat::Constant(model.pose_dim(), 1, 1.2);
  const Mat fj = pose_joint_features(model, far), tj = pose_joint_features(model, train);
  double best = 1e300;
  for (Index i = 0; i < tj.cols(); ++i) best = std::min(best, mean_joint_distance(fj.col(0), tj.col(i)));
  EXPECT_NEAR(d_nn(far, train, model), best, 1e-14);
  const Mat q = 0.3 * gaussian_matrix(rng, model.pose_dim(), 5);
  Mat more(model.pose_dim(), 60);
  more << train, 0.3 * gaussian_matrix(rng, model.pose_dim(), 20);
  EXPECT_LE(d_nn(q, more, model), d_nn(q, train, model));
  EXPECT_THROW(d_nn(Mat(model.pose_dim(), 0), train, model), UsageError);
}

TEST(Fid, ClosedForms) {
  Rng rng(7);
  const Mat a = gaussian_matrix(rng, 4, 500);
  EXPECT_LT(std::abs(fid(a, a)), 1e-8);
  Mat b = gaussian_matrix(rng, 4, 500);
  EXPECT_LT(std::abs(fid(a, b) - fid(b, a)), 1e-8);
  // identical covariance, means 2 apart in one dim
  Mat c = a;
  c.row(1).array() += 2.0;
  EXPECT_NEAR(fid(a, c), 4.0, 1e-8);
}

TEST(Fid, AnalyticGaussians) {
  Rng rng(8);
  const Index d = 3, n = 10000;
  Vec ma(3), mb(3);
  ma << 0, 1, 0;
  mb << 0.5, 0, -0.5;
  Mat la = Mat::Identity(d, d), lb(d, d);
  lb << 1.5, 0, 0, 0.3, 0.7, 0, -0.2, 0.1, 1.1;
  const Mat sa = la * la.transpose(), sb = lb * lb.transpose();
  const Mat a = (la * gaussian_matrix(rng, d, n)).colwise() + ma;
  const Mat b = (lb * gaussian_matrix(rng, d, n)).colwise() + mb;
  const Mat ra = sym_psd_sqrt(sa);
  const double want = (ma - mb).squaredNorm() + (sa + sb - 2.0 * sym_psd_sqrt(ra * sb * ra)).trace();
  EXPECT_LT(std::abs(fid(a, b) - want) / want, 0.02);
}

TEST(Fid, RankDeficientRegularized) {
  Rng rng(9);
  const Mat a = gaussian_matrix(rng, 10, 5);
  const Mat b = gaussian_matrix(rng, 10, 5);
  bool reg = false;
  const double v = fid(a, b, &reg);
  EXPECT_TRUE(reg);
  EXPECT_TRUE(std::isfinite(v));
}

TEST(PrecisionRecall, Examples) {
  Rng rng(10);
  const Mat real = gaussian_matrix(rng, 2, 400);
  auto pr = precision_recall(real, real, 3);
  EXPECT_EQ(pr.precision, 1.0);
  EXPECT_EQ(pr.recall, 1.0);
  const Mat far = (gaussian_matrix(rng, 2, 400).array() + 50.0).matrix();
  EXPECT_LT(precision_recall(far, real, 3).precision, 0.01);
  // real has two modes, generator covers one of them
  Mat two(2, 800);
  two << gaussian_matrix(rng, 2, 400).array() - 10.0, gaussian_matrix(rng, 2, 400).array() + 10.0;
  const Mat half = (gaussian_matrix(rng, 2, 800).array() - 10.0).matrix();
  pr = precision_recall(half, two, 3);
  EXPECT_NEAR(pr.recall, 0.5, 0.1);
  EXPECT_GT(pr.precision, 0.9);
  EXPECT_THROW(precision_recall(real.leftCols(3), real, 3), UsageError);
}

TEST(Metrics, PermutationInvariance) {
  Rng rng(11);
  const Mat a = gaussian_matrix(rng, 3, 200), b = gaussian_matrix(rng, 3, 150);
  Eigen::PermutationMatrix<Eigen::Dynamic> pa(200), pb(150);
  pa.setIdentity();
  pb.setIdentity();
  for (Index i = 199; i > 0; --i) std::swap(pa.indices()[i], pa.indices()[static_cast<Index>(rng.next_u64() % (i + 1))]);
  for (Index i = 149; i > 0; --i) std::swap(pb.indices()[i], pb.indices()[static_cast<Index>(rng.next_u64() % (i + 1))]);
  const Mat ap = a * pa, bp = b * pb;
  EXPECT_NEAR(fid(a, b), fid(ap, bp), 1e-10);
  const auto x = precision_recall(a, b), y = precision_recall(ap, bp);
  EXPECT_EQ(x.precision, y.precision);
  EXPECT_EQ(x.recall, y.recall);
  const Mat3X pts = gaussian_matrix(rng, 3, 20), gt = gaussian_matrix(rng, 3, 20);
  Eigen::PermutationMatrix<Eigen::Dynamic> pp(20);
  pp.setIdentity();
  std::swap(pp.indices()[0], pp.indices()[7]);
  EXPECT_NEAR(position_error(pts, gt, true), position_error(pts * pp, gt * pp, true), 1e-12);
}

TEST(MetricReport, SerializationAndValidation) {
  MetricReport r;
  r.set("mpjpe", 0.05, "length", 10);
  r.set("precision", 0.9, "ratio", 100);
  r.validate();
  EXPECT_EQ(r.csv_header(), "mpjpe,precision");
  EXPECT_EQ(r.to_json()["mpjpe"]["count"], 10);
  r.set("recall", 1.5, "ratio", 100);
  EXPECT_THROW(r.validate(), NumericError);
  r.set("recall", std::nan(""), "ratio", 100);
  EXPECT_THROW(r.validate(), NumericError);
}
