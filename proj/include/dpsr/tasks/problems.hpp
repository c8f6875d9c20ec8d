#pragma once

#include <optional>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/kinematics/camera.hpp"
#include "dpsr/kinematics/fk.hpp"
#include "dpsr/prior/optimize.hpp"
#include "dpsr/synthdata/normalize.hpp"
#include "dpsr/tasks/robust.hpp"

namespace dpsr {

// Per-dimension (completion) or per-joint (3D/2D) observation mask.
using MaskSpec = std::vector<bool>;

inline Index mask_count(const MaskSpec& m) {
  Index n = 0;
  for (bool b : m) n += b ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------- completion

// sum over observed dims of (x_i - y_i)^2; y lists only the observed values.
inline double completion_loss(const Vec& x, const MaskSpec& mask, const Vec& y, Vec* grad = nullptr) {
  require_dims(static_cast<Index>(mask.size()), x.size(), "completion mask");
  require_dims(y.size(), mask_count(mask), "completion measurement");
  double loss = 0.0;
  if (grad) grad->setZero(x.size());
  Index k = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double r = x[i] - y[k++];
    loss += r * r;
    if (grad) (*grad)[i] = 2.0 * r;
  }
  return loss;
}

class CompletionProblem : public TaskProblem {
 public:
  CompletionProblem(MaskSpec mask, Vec observed) : mask_(std::move(mask)), y_(std::move(observed)) {
    require_dims(y_.size(), mask_count(mask_), "completion measurement");
  }

  const MaskSpec& mask() const { return mask_; }
  const Vec& observed() const { return y_; }

  Index pose_dim() const override { return static_cast<Index>(mask_.size()); }

  // Observed entries start at the measurement; the rest are noise.
  Mat initial_pose(const NormStats& stats, Rng& rng) const override {
    Mat x = gaussian_matrix(rng, pose_dim(), 1);
    Index k = 0;
    for (Index i = 0; i < pose_dim(); ++i)
      if (mask_[static_cast<std::size_t>(i)]) x(i, 0) = (y_[k++] - stats.mean[i]) / stats.std[i];
    return x;
  }

  double loss_and_grad(const Mat& poses, const Vec& /*aux*/, Mat* gp, Vec* ga) const override {
    require_dims(poses.cols(), 1, "completion frames");
    Vec g;
    const double l = completion_loss(poses.col(0), mask_, y_, gp ? &g : nullptr);
    if (gp) *gp = g;
    if (ga) ga->resize(0);
    return l;
  }

 private:
  MaskSpec mask_;
  Vec y_;
};

// Expands a per-dimension mask for the given observed full vector.
inline Vec observed_values(const Vec& full, const MaskSpec& mask) {
  Vec y(mask_count(mask));
  Index k = 0;
  for (Index i = 0; i < full.size(); ++i)
    if (mask[static_cast<std::size_t>(i)]) y[k++] = full[i];
  return y;
}

// ------------------------------------------------------ inverse kinematics

// sum over known joints of ||FK(pose, shape)_i - J_obs,i||^2.
inline double ik_loss(const ArticulatedModel& model, const PoseParams& pose, const Vec& shape,
                      const Mat3X& observed, const MaskSpec& joint_mask, PoseGradient* grad = nullptr) {
  require_dims(observed.cols(), model.num_joints(), "ik observed joints");
  require_dims(static_cast<Index>(joint_mask.size()), model.num_joints(), "ik joint mask");
  require(mask_count(joint_mask) >= 1, "ik: no known joints");
  const FkTape tape = fk_forward(model, pose, shape);
  double loss = 0.0;
  Mat3X adj = Mat3X::Zero(3, model.num_joints());
  for (Index j = 0; j < model.num_joints(); ++j) {
    if (!joint_mask[static_cast<std::size_t>(j)]) continue;
    const Vec3 r = tape.joints.col(j) - observed.col(j);
    loss += r.squaredNorm();
    adj.col(j) = 2.0 * r;
  }
  if (grad) *grad = fk_backward(model, tape, shape, adj);
  return loss;
}

class IkProblem : public TaskProblem {
 public:
  IkProblem(const ArticulatedModel& model, Vec shape, Mat3X observed, MaskSpec joint_mask)
      : model_(model), shape_(std::move(shape)), obs_(std::move(observed)), mask_(std::move(joint_mask)) {
    require_dims(shape_.size(), model_.shape_dim(), "ik shape");
    require_dims(obs_.cols(), model_.num_joints(), "ik observed joints");
    require_dims(static_cast<Index>(mask_.size()), model_.num_joints(), "ik joint mask");
    require(mask_count(mask_) >= 1, "ik: no known joints");
  }

  Index pose_dim() const override { return model_.pose_dim(); }

  double loss_and_grad(const Mat& poses, const Vec& /*aux*/, Mat* gp, Vec* ga) const override {
    require_dims(poses.cols(), 1, "ik frames");
    PoseGradient g;
    const double l = ik_loss(model_, PoseParams::from_vector(model_, poses.col(0)), shape_, obs_, mask_,
                             gp ? &g : nullptr);
    if (gp) *gp = g.pose_vector();
    if (ga) ga->resize(0);
    return l;
  }

 private:
  const ArticulatedModel& model_;
  Vec shape_;
  Mat3X obs_;
  MaskSpec mask_;
};

// ------------------------------------------------------- 2D keypoint fitting

// sum_i c_i rho(||Pi(FK_i) - k_i||); confidences weight each joint.
inline double fit2d_loss(const ArticulatedModel& model, const PoseParams& pose, const Vec& shape, const Camera& cam,
                         const Mat2X& keypoints, const Vec& confidence, const RobustifierConfig& robust,
                         PoseGradient* grad = nullptr) {
  require_dims(keypoints.cols(), model.num_joints(), "fit2d keypoints");
  require_dims(confidence.size(), model.num_joints(), "fit2d confidences");
  require((confidence.array() >= 0.0).all(), "fit2d: confidences must be non-negative");
  robust.validate();
  const FkTape tape = fk_forward(model, pose, shape);
  const Mat2X uv = project_perspective(cam, tape.joints);
  double loss = 0.0;
  Mat2X adj_uv = Mat2X::Zero(2, uv.cols());
  for (Index j = 0; j < uv.cols(); ++j) {
    if (confidence[j] == 0.0) continue;
    const Eigen::Vector2d r = uv.col(j) - keypoints.col(j);
    const double q = r.squaredNorm();
    loss += confidence[j] * robust.value(q);
    adj_uv.col(j) = confidence[j] * robust.derivative(q) * 2.0 * r;
  }
  if (grad) *grad = fk_backward(model, tape, shape, project_perspective_backward(cam, tape.joints, adj_uv));
  return loss;
}

// Aux layout: [shape (J-1); global_orient (3); translation (3)].
class Fit2dProblem : public TaskProblem {
 public:
  Fit2dProblem(const ArticulatedModel& model, Camera cam, Mat2X keypoints, Vec confidence,
               RobustifierConfig robust, double shape_weight, Vec init_pose_raw, Vec3 init_orient,
               Vec3 init_translation)
      : model_(model),
        cam_(std::move(cam)),
        kp_(std::move(keypoints)),
        conf_(std::move(confidence)),
        robust_(robust),
        w_beta_(shape_weight),
        init_pose_(std::move(init_pose_raw)),
        init_orient_(init_orient),
        init_transl_(init_translation) {
    require_dims(kp_.cols(), model_.num_joints(), "fit2d keypoints");
    require_dims(conf_.size(), model_.num_joints(), "fit2d confidences");
    require_dims(init_pose_.size(), model_.pose_dim(), "fit2d initial pose");
    require(shape_weight >= 0.0, "fit2d: shape weight must be >= 0");
    robust_.validate();
  }

  Index pose_dim() const override { return model_.pose_dim(); }
  Index aux_dim() const override { return model_.shape_dim() + 6; }
  Vec initial_aux() const override {
    Vec a = Vec::Zero(aux_dim());
    a.segment<3>(model_.shape_dim()) = init_orient_;
    a.segment<3>(model_.shape_dim() + 3) = init_transl_;
    return a;
  }
  // Starts from the supplied pose estimate.
  Mat initial_pose(const NormStats& stats, Rng& /*rng*/) const override { return normalize(init_pose_, stats); }

  double loss_and_grad(const Mat& poses, const Vec& aux, Mat* gp, Vec* ga) const override {
    require_dims(poses.cols(), 1, "fit2d frames");
    require_dims(aux.size(), aux_dim(), "fit2d aux");
    const Index ns = model_.shape_dim();
    PoseParams p = PoseParams::from_vector(model_, poses.col(0));
    const Vec shape = aux.head(ns);
    p.global_orient = aux.segment<3>(ns);
    p.translation = aux.segment<3>(ns + 3);
    PoseGradient g;
    const bool want = gp || ga;
    double loss = fit2d_loss(model_, p, shape, cam_, kp_, conf_, robust_, want ? &g : nullptr);
    loss += w_beta_ * shape.squaredNorm();
    if (gp) *gp = g.pose_vector();
    if (ga) {
      ga->resize(aux_dim());
      ga->head(ns) = g.shape + 2.0 * w_beta_ * shape;
      ga->segment<3>(ns) = g.global_orient;
      ga->segment<3>(ns + 3) = g.translation;
    }
    return loss;
  }

 private:
  const ArticulatedModel& model_;
  Camera cam_;
  Mat2X kp_;
  Vec conf_;
  RobustifierConfig robust_;
  double w_beta_;
  Vec init_pose_;
  Vec3 init_orient_;
  Vec3 init_transl_;
};

// ------------------------------------------------------------ motion denoise

struct MotionLoss {
  double obs = 0.0;
  double temp = 0.0;
  double total = 0.0;
};

// L_obs = sum_f ||mask (FK(theta_f) - J_obs,f)||^2,
// L_temp = sum_f ||FK(theta_{f-1}) - FK(theta_f)||^2, shape fixed at zero.
// `transforms` holds per-frame [global_orient; translation] (6 x F) or is empty.
inline MotionLoss motion_denoise_loss(const ArticulatedModel& model, const Mat& poses, const Mat& transforms,
                                      const std::vector<Mat3X>& observed, const MaskSpec& joint_mask,
                                      double w_temp, Mat* grad_poses = nullptr, Mat* grad_transforms = nullptr) {
  const Index nf = poses.cols();
  require(nf >= 2, "motion_denoise_loss: need at least two frames");
  require_dims(static_cast<Index>(observed.size()), nf, "motion observed frames");
  require_dims(poses.rows(), model.pose_dim(), "motion poses");
  require_dims(static_cast<Index>(joint_mask.size()), model.num_joints(), "motion joint mask");
  require(transforms.size() == 0 || (transforms.rows() == 6 && transforms.cols() == nf),
          "motion_denoise_loss: transforms must be 6 x frames");
  const Vec shape = Vec::Zero(model.shape_dim());
  std::vector<FkTape> tapes;
  tapes.reserve(static_cast<std::size_t>(nf));
  for (Index f = 0; f < nf; ++f) {
    PoseParams p = PoseParams::from_vector(model, poses.col(f));
    if (transforms.size() > 0) {
      p.global_orient = transforms.col(f).head<3>();
      p.translation = transforms.col(f).tail<3>();
    }
    tapes.push_back(fk_forward(model, p, shape));
  }
  MotionLoss out;
  std::vector<Mat3X> adj(static_cast<std::size_t>(nf), Mat3X::Zero(3, model.num_joints()));
  for (Index f = 0; f < nf; ++f) {
    const auto fu = static_cast<std::size_t>(f);
    require_dims(observed[fu].cols(), model.num_joints(), "motion observed joints");
    for (Index j = 0; j < model.num_joints(); ++j) {
      if (!joint_mask[static_cast<std::size_t>(j)]) continue;
      const Vec3 r = tapes[fu].joints.col(j) - observed[fu].col(j);
      out.obs += r.squaredNorm();
      adj[fu].col(j) += 2.0 * r;
    }
    if (f > 0) {
      const Mat3X dlt = tapes[fu - 1].joints - tapes[fu].joints;
      out.temp += dlt.squaredNorm();
      adj[fu - 1] += 2.0 * w_temp * dlt;
      adj[fu] -= 2.0 * w_temp * dlt;
    }
  }
  out.total = out.obs + w_temp * out.temp;
  if (grad_poses || grad_transforms) {
    if (grad_poses) grad_poses->resize(model.pose_dim(), nf);
    if (grad_transforms) grad_transforms->setZero(6, nf);
    for (Index f = 0; f < nf; ++f) {
      const auto fu = static_cast<std::size_t>(f);
      const PoseGradient g = fk_backward(model, tapes[fu], shape, adj[fu]);
      if (grad_poses) grad_poses->col(f) = g.pose_vector();
      if (grad_transforms) {
        grad_transforms->col(f).head<3>() = g.global_orient;
        grad_transforms->col(f).tail<3>() = g.translation;
      }
    }
  }
  return out;
}

// Aux layout: per-frame [global_orient; translation], frame-major (6 F).
class MotionProblem : public TaskProblem {
 public:
  MotionProblem(const ArticulatedModel& model, std::vector<Mat3X> observed, MaskSpec joint_mask, double w_temp)
      : model_(model), obs_(std::move(observed)), mask_(std::move(joint_mask)), w_temp_(w_temp) {
    require(obs_.size() >= 2, "motion: need at least two frames");
    require_dims(static_cast<Index>(mask_.size()), model_.num_joints(), "motion joint mask");
    require(w_temp >= 0.0, "motion: w_temp must be >= 0");
  }

  Index pose_dim() const override { return model_.pose_dim(); }
  Index frames() const override { return static_cast<Index>(obs_.size()); }
  Index aux_dim() const override { return 6 * frames(); }
  // Mean pose in every frame.
  Mat initial_pose(const NormStats& /*stats*/, Rng& /*rng*/) const override {
    return Mat::Zero(pose_dim(), frames());
  }

  double loss_and_grad(const Mat& poses, const Vec& aux, Mat* gp, Vec* ga) const override {
    require_dims(aux.size(), aux_dim(), "motion aux");
    const Eigen::Map<const Mat> tf(aux.data(), 6, frames());
    Mat gt;
    const MotionLoss l = motion_denoise_loss(model_, poses, tf, obs_, mask_, w_temp_, gp, ga ? &gt : nullptr);
    if (ga) *ga = Eigen::Map<const Vec>(gt.data(), gt.size());
    return l.total;
  }

 private:
  const ArticulatedModel& model_;
  std::vector<Mat3X> obs_;
  MaskSpec mask_;
  double w_temp_;
};

}  // namespace dpsr
