#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/kinematics/model.hpp"
#include "dpsr/kinematics/rotation.hpp"

namespace dpsr {

struct PoseParams {
  Vec theta;       // 3 per joint, axis-angle
  Vec expression;  // expression coefficients
  Vec3 global_orient = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  // Splits a flat pose vector [theta; expression] with identity global transform.
  static PoseParams from_vector(const ArticulatedModel& model, const Eigen::Ref<const Vec>& pose) {
    require_dims(pose.size(), model.pose_dim(), "pose vector");
    PoseParams p;
    p.theta = pose.head(3 * model.num_joints());
    p.expression = pose.tail(model.expression_count());
    return p;
  }

  Vec to_vector() const {
    Vec v(theta.size() + expression.size());
    v << theta, expression;
    return v;
  }
};

struct PoseGradient {
  Vec theta;
  Vec expression;
  Vec3 global_orient = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec shape;

  Vec pose_vector() const {
    Vec v(theta.size() + expression.size());
    v << theta, expression;
    return v;
  }
};

// Intermediates of one forward-kinematics evaluation, consumed by fk_backward.
struct FkTape {
  RotationWithJacobian global;
  std::vector<RotationWithJacobian> local;
  std::vector<Mat3> world_rot;
  std::vector<Vec3> bone;  // parent-frame vector from parent to joint
  Mat3X joints;
};

inline FkTape fk_forward(const ArticulatedModel& model, const PoseParams& pose, const Vec& shape) {
  const Index nj = model.num_joints();
  require_dims(pose.theta.size(), 3 * nj, "pose theta");
  require_dims(pose.expression.size(), model.expression_count(), "pose expression");
  require_dims(shape.size(), model.shape_dim(), "shape");
  FkTape tape;
  tape.global = rodrigues_with_jacobian(pose.global_orient);
  tape.local.resize(static_cast<std::size_t>(nj));
  tape.world_rot.resize(static_cast<std::size_t>(nj));
  tape.bone.resize(static_cast<std::size_t>(nj));
  tape.joints.resize(3, nj);

  Vec disp;
  if (model.expression_count() > 0) disp = model.expression_scale() * (model.expression_basis() * pose.expression);

  for (Index j = 0; j < nj; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    tape.local[ju] = rodrigues_with_jacobian(pose.theta.segment<3>(3 * j));
    const Joint& jt = model.joint(j);
    if (j == 0) {
      tape.bone[0] = jt.offset;
      tape.world_rot[0] = tape.global.rotation * tape.local[0].rotation;
      tape.joints.col(0) = pose.translation + tape.global.rotation * jt.offset;
      continue;
    }
    const auto pu = static_cast<std::size_t>(jt.parent);
    Vec3 b = std::exp(shape[j - 1]) * jt.offset;
    const Index slot = model.face_slot(j);
    if (slot >= 0 && disp.size() > 0) b += disp.segment<3>(3 * slot);
    tape.bone[ju] = b;
    tape.world_rot[ju] = tape.world_rot[pu] * tape.local[ju].rotation;
    tape.joints.col(j) = tape.joints.col(jt.parent) + tape.world_rot[pu] * b;
  }
  return tape;
}

inline Mat3X forward_kinematics(const ArticulatedModel& model, const PoseParams& pose, const Vec& shape) {
  return fk_forward(model, pose, shape).joints;
}

inline Mat3X forward_kinematics(const ArticulatedModel& model, const Eigen::Ref<const Vec>& pose_vector) {
  return fk_forward(model, PoseParams::from_vector(model, pose_vector), Vec::Zero(model.shape_dim())).joints;
}

// Reverse pass: gradient of sum(adj_joints .* joints) w.r.t. every FK input.
inline PoseGradient fk_backward(const ArticulatedModel& model, const FkTape& tape, const Vec& shape,
                                const Mat3X& adj_joints) {
  const Index nj = model.num_joints();
  require_dims(adj_joints.cols(), nj, "fk_backward adjoint");
  PoseGradient g;
  g.theta = Vec::Zero(3 * nj);
  g.expression = Vec::Zero(model.expression_count());
  g.shape = Vec::Zero(model.shape_dim());
  Mat3X adj_pos = adj_joints;
  std::vector<Mat3> adj_rot(static_cast<std::size_t>(nj), Mat3::Zero());
  Vec adj_disp = Vec::Zero(3 * static_cast<Index>(model.face_joints().size()));

  for (Index j = nj - 1; j >= 1; --j) {
    const auto ju = static_cast<std::size_t>(j);
    const Joint& jt = model.joint(j);
    const auto pu = static_cast<std::size_t>(jt.parent);
    const Vec3 ap = adj_pos.col(j);
    adj_pos.col(jt.parent) += ap;
    adj_rot[pu] += ap * tape.bone[ju].transpose();
    const Vec3 adj_bone = tape.world_rot[pu].transpose() * ap;
    g.shape[j - 1] = adj_bone.dot(std::exp(shape[j - 1]) * jt.offset);
    const Index slot = model.face_slot(j);
    if (slot >= 0) adj_disp.segment<3>(3 * slot) = adj_bone;
    adj_rot[pu] += adj_rot[ju] * tape.local[ju].rotation.transpose();
    const Mat3 adj_local = tape.world_rot[pu].transpose() * adj_rot[ju];
    g.theta.segment<3>(3 * j) = rodrigues_vjp(tape.local[ju], adj_local);
  }
  const Vec3 ap0 = adj_pos.col(0);
  g.translation = ap0;
  const Mat3 adj_global = ap0 * model.joint(0).offset.transpose() + adj_rot[0] * tape.local[0].rotation.transpose();
  g.theta.segment<3>(0) = rodrigues_vjp(tape.local[0], tape.global.rotation.transpose() * adj_rot[0]);
  g.global_orient = rodrigues_vjp(tape.global, adj_global);
  if (model.expression_count() > 0) {
    g.expression = model.expression_scale() * (model.expression_basis().transpose() * adj_disp);
  }
  return g;
}

inline constexpr std::array<double, 3> kVertexFractions{0.25, 0.5, 0.75};

// Three points per bone, bone-major order: 3 * (J - 1) vertices.
inline Mat3X surrogate_vertices(const ArticulatedModel& model, const Mat3X& joints) {
  require_dims(joints.cols(), model.num_joints(), "surrogate_vertices joints");
  Mat3X v(3, 3 * model.num_bones());
  Index k = 0;
  for (Index j = 1; j < model.num_joints(); ++j) {
    const Vec3 a = joints.col(model.joint(j).parent);
    const Vec3 b = joints.col(j);
    for (double f : kVertexFractions) v.col(k++) = a + f * (b - a);
  }
  return v;
}

inline Mat3X surrogate_vertices_backward(const ArticulatedModel& model, const Mat3X& adj_vertices) {
  require_dims(adj_vertices.cols(), 3 * model.num_bones(), "surrogate_vertices adjoint");
  Mat3X adj = Mat3X::Zero(3, model.num_joints());
  Index k = 0;
  for (Index j = 1; j < model.num_joints(); ++j) {
    const Index p = model.joint(j).parent;
    for (double f : kVertexFractions) {
      adj.col(p) += (1.0 - f) * adj_vertices.col(k);
      adj.col(j) += f * adj_vertices.col(k);
      ++k;
    }
  }
  return adj;
}

}  // namespace dpsr
