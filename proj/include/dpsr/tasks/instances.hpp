#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "dpsr/composite/part_split.hpp"
#include "dpsr/eval/metrics.hpp"
#include "dpsr/synthdata/mixture.hpp"
#include "dpsr/tasks/problems.hpp"

namespace dpsr {

// Default optimization settings per task (truncated interval, weight, budget).
struct TaskPreset {
  double t_max = 0.15;
  double t_min = 0.05;
  double lambda_reg = 1.0;
  double lr = 0.05;
  Index iterations = 500;
  double lr_final = -1.0;  // < 0: constant learning rate

  SchedulePolicy policy() const { return SchedulePolicy::truncated(t_max, t_min, iterations); }
  PriorConfig prior_config(std::uint64_t seed) const {
    PriorConfig c;
    c.lambda_reg = lambda_reg;
    c.lr = lr;
    c.iterations = iterations;
    c.lr_final = lr_final;
    c.seed = seed;
    return c;
  }
};

inline TaskPreset task_preset(const std::string& task) {
  if (task == "complete") return {0.15, 0.05, 0.001, 0.05, 500, 0.001};
  if (task == "ik") return {0.15, 0.05, 0.001, 0.05, 500, 0.001};
  if (task == "fit2d") return {0.12, 0.08, 0.001, 0.02, 500, 0.001};
  if (task == "denoise-motion") return {0.2, 0.05, 0.05, 0.02, 300, -1.0};
  throw UsageError("unknown task '" + task + "'");
}

namespace io {

inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vec json_vec(const nlohmann::json& js) {
  const auto v = js.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

inline nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index c = 0; c < m.cols(); ++c) rows.push_back(vec_json(m.col(c)));
  return rows;
}

// Columns of a matrix stored as a list of equal-length rows.
inline Mat json_mat(const nlohmann::json& js, Index rows) {
  Mat m(rows, static_cast<Index>(js.size()));
  for (Index c = 0; c < m.cols(); ++c) {
    const Vec v = json_vec(js.at(static_cast<std::size_t>(c)));
    if (v.size() != rows) throw FormatError("expected " + std::to_string(rows) + " entries per item");
    m.col(c) = v;
  }
  return m;
}

inline nlohmann::json mask_json(const MaskSpec& m) { return std::vector<bool>(m.begin(), m.end()); }
inline MaskSpec json_mask(const nlohmann::json& js) { return js.get<std::vector<bool>>(); }

inline nlohmann::json camera_json(const Camera& c) {
  return {{"focal", c.focal},
          {"cx", c.cx},
          {"cy", c.cy},
          {"rotation", vec_json(Eigen::Map<const Vec>(c.rotation.data(), 9))},
          {"translation", vec_json(c.translation)}};
}

inline Camera json_camera(const nlohmann::json& js) {
  Camera c;
  c.focal = js.at("focal").get<double>();
  c.cx = js.value("cx", 0.0);
  c.cy = js.value("cy", 0.0);
  if (js.contains("rotation")) {
    const Vec r = json_vec(js.at("rotation"));
    if (r.size() != 9) throw FormatError("camera rotation needs 9 entries");
    c.rotation = Eigen::Map<const Mat3>(r.data());
  }
  if (js.contains("translation")) c.translation = json_vec(js.at("translation"));
  return c;
}

}  // namespace io

// ---------------------------------------------------------------- instances

struct CompletionInstance {
  MaskSpec mask;  // true = observed dimension
  Vec observed;
  Vec gt;  // raw ground truth, empty when unknown

  nlohmann::json to_json() const {
    nlohmann::json js{{"task", "complete"}, {"mask", io::mask_json(mask)}, {"observed", io::vec_json(observed)}};
    if (gt.size()) js["gt"] = io::vec_json(gt);
    return js;
  }
  static CompletionInstance from_json(const nlohmann::json& js) {
    CompletionInstance c{io::json_mask(js.at("mask")), io::json_vec(js.at("observed")), {}};
    if (js.contains("gt")) c.gt = io::json_vec(js.at("gt"));
    require_dims(c.observed.size(), mask_count(c.mask), "completion instance measurement");
    return c;
  }
  CompletionProblem problem() const { return CompletionProblem(mask, observed); }
};

// Observes every dimension outside the hidden blocks.
inline MaskSpec block_mask(const PartSplit& split, const std::vector<PartBlock>& hidden) {
  MaskSpec m(static_cast<std::size_t>(split.total()), true);
  for (PartBlock p : hidden)
    for (Index i = split[p].begin; i < split[p].end(); ++i) m[static_cast<std::size_t>(i)] = false;
  return m;
}

inline PartBlock block_from_name(const std::string& s) {
  if (s == "body") return PartBlock::Body;
  if (s == "left_hand" || s == "lhand") return PartBlock::LeftHand;
  if (s == "right_hand" || s == "rhand") return PartBlock::RightHand;
  if (s == "face") return PartBlock::Face;
  throw UsageError("unknown part block '" + s + "'");
}

inline CompletionInstance make_completion_instance(const MixtureSpec& spec, const std::vector<PartBlock>& hidden,
                                                   Rng& rng) {
  CompletionInstance c;
  c.gt = sample_gt_pose(spec, rng);
  c.mask = block_mask(spec.split, hidden);
  c.observed = observed_values(c.gt, c.mask);
  return c;
}

struct IkInstance {
  Vec shape;
  Mat3X joints;
  MaskSpec joint_mask;
  Vec gt;

  nlohmann::json to_json() const {
    nlohmann::json js{{"task", "ik"},
                      {"shape", io::vec_json(shape)},
                      {"joints", io::mat_json(joints)},
                      {"joint_mask", io::mask_json(joint_mask)}};
    if (gt.size()) js["gt"] = io::vec_json(gt);
    return js;
  }
  static IkInstance from_json(const nlohmann::json& js) {
    IkInstance c{io::json_vec(js.at("shape")), io::json_mat(js.at("joints"), 3), io::json_mask(js.at("joint_mask")), {}};
    if (js.contains("gt")) c.gt = io::json_vec(js.at("gt"));
    return c;
  }
  IkProblem problem(const ArticulatedModel& model) const { return IkProblem(model, shape, joints, joint_mask); }
};

// Leaf joints of the kinematic tree (chain ends).
inline MaskSpec leaf_joint_mask(const ArticulatedModel& model) {
  MaskSpec m(static_cast<std::size_t>(model.num_joints()), true);
  for (Index j = 0; j < model.num_joints(); ++j) {
    const int p = model.joints()[static_cast<std::size_t>(j)].parent;
    if (p >= 0) m[static_cast<std::size_t>(p)] = false;
  }
  return m;
}

inline IkInstance make_ik_instance(const ArticulatedModel& model, const MixtureSpec& spec, bool ends_only,
                                   double noise_std, Rng& rng) {
  IkInstance c;
  c.gt = sample_gt_pose(spec, rng);
  c.shape = Vec::Zero(model.shape_dim());
  c.joints = forward_kinematics(model, c.gt);
  for (Index i = 0; i < c.joints.size(); ++i) c.joints.data()[i] += noise_std * rng.normal();
  c.joint_mask = ends_only ? leaf_joint_mask(model) : MaskSpec(static_cast<std::size_t>(model.num_joints()), true);
  return c;
}

struct Fit2dInstance {
  Camera camera;
  Mat2X keypoints;
  Vec confidence;
  RobustifierConfig robust;
  double shape_weight = 1.0;
  Vec init_pose;
  Vec3 init_orient = Vec3::Zero();
  Vec3 init_translation = Vec3::Zero();
  Vec gt;
  Vec gt_shape;
  Vec3 gt_orient = Vec3::Zero();
  Vec3 gt_translation = Vec3::Zero();

  nlohmann::json to_json() const {
    nlohmann::json js{{"task", "fit2d"},
                      {"camera", io::camera_json(camera)},
                      {"keypoints", io::mat_json(keypoints)},
                      {"confidence", io::vec_json(confidence)},
                      {"robust", {{"kind", robust_kind_name(robust.kind)}, {"sigma", robust.sigma}}},
                      {"shape_weight", shape_weight},
                      {"init_pose", io::vec_json(init_pose)},
                      {"init_orient", io::vec_json(init_orient)},
                      {"init_translation", io::vec_json(init_translation)}};
    if (gt.size()) {
      js["gt"] = io::vec_json(gt);
      js["gt_shape"] = io::vec_json(gt_shape);
      js["gt_orient"] = io::vec_json(gt_orient);
      js["gt_translation"] = io::vec_json(gt_translation);
    }
    return js;
  }
  static Fit2dInstance from_json(const nlohmann::json& js) {
    Fit2dInstance c;
    c.camera = io::json_camera(js.at("camera"));
    c.keypoints = io::json_mat(js.at("keypoints"), 2);
    c.confidence = io::json_vec(js.at("confidence"));
    c.robust.kind = robust_kind_from_name(js.at("robust").value("kind", std::string("geman-mcclure")));
    c.robust.sigma = js.at("robust").value("sigma", 100.0);
    c.shape_weight = js.value("shape_weight", 1.0);
    c.init_pose = io::json_vec(js.at("init_pose"));
    c.init_orient = io::json_vec(js.at("init_orient"));
    c.init_translation = io::json_vec(js.at("init_translation"));
    if (js.contains("gt")) {
      c.gt = io::json_vec(js.at("gt"));
      c.gt_shape = io::json_vec(js.at("gt_shape"));
      c.gt_orient = io::json_vec(js.at("gt_orient"));
      c.gt_translation = io::json_vec(js.at("gt_translation"));
    }
    return c;
  }
  Fit2dProblem problem(const ArticulatedModel& model) const {
    return Fit2dProblem(model, camera, keypoints, confidence, robust, shape_weight, init_pose, init_orient,
                        init_translation);
  }

  // Ground-truth 3D joints at the true shape and global transform.
  Mat3X gt_joints(const ArticulatedModel& model) const {
    PoseParams p = PoseParams::from_vector(model, gt);
    p.global_orient = gt_orient;
    p.translation = gt_translation;
    return forward_kinematics(model, p, gt_shape);
  }
};

struct Fit2dGenOptions {
  double occluded_fraction = 0.3;  // keypoints with confidence 0
  double pixel_noise = 2.0;
  double shape_std = 0.05;
  double orient_perturb = 0.1;
  double translation_perturb = 0.05;
};

// Camera 2.5 units in front of the figure, looking along +z.
inline Camera default_fit_camera() {
  Camera c;
  c.translation = Vec3(0.0, -1.2, 2.5);
  return c;
}

inline Fit2dInstance make_fit2d_instance(const ArticulatedModel& model, const MixtureSpec& spec,
                                         const Vec& mean_pose, const Fit2dGenOptions& opt, Rng& rng) {
  Fit2dInstance c;
  c.camera = default_fit_camera();
  c.gt = sample_gt_pose(spec, rng);
  c.gt_shape = opt.shape_std * gaussian_sample(rng, model.shape_dim());
  c.gt_orient = Vec3(0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal());
  c.gt_translation = Vec3::Zero();
  c.keypoints = project_perspective(c.camera, c.gt_joints(model));
  for (Index i = 0; i < c.keypoints.size(); ++i) c.keypoints.data()[i] += opt.pixel_noise * rng.normal();
  c.confidence = Vec::Ones(model.num_joints());
  const auto n_occ = static_cast<Index>(std::lround(opt.occluded_fraction * static_cast<double>(model.num_joints())));
  std::vector<Index> order(static_cast<std::size_t>(model.num_joints()));
  for (Index j = 0; j < model.num_joints(); ++j) order[static_cast<std::size_t>(j)] = j;
  for (Index j = model.num_joints() - 1; j > 0; --j)
    std::swap(order[static_cast<std::size_t>(j)], order[rng.next_u64() % static_cast<std::uint64_t>(j + 1)]);
  for (Index k = 0; k < n_occ; ++k) c.confidence[order[static_cast<std::size_t>(k)]] = 0.0;
  c.init_pose = mean_pose;
  for (int a = 0; a < 3; ++a) {
    c.init_orient[a] = c.gt_orient[a] + opt.orient_perturb * rng.normal();
    c.init_translation[a] = c.gt_translation[a] + opt.translation_perturb * rng.normal();
  }
  return c;
}

struct MotionInstance {
  std::vector<Mat3X> observed;
  MaskSpec joint_mask;
  double w_temp = 0.5;
  Mat gt;  // raw poses per frame

  nlohmann::json to_json() const {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : observed) frames.push_back(io::mat_json(f));
    nlohmann::json js{{"task", "denoise-motion"}, {"frames", frames}, {"joint_mask", io::mask_json(joint_mask)},
                      {"w_temp", w_temp}};
    if (gt.size()) js["gt"] = io::mat_json(gt);
    return js;
  }
  static MotionInstance from_json(const nlohmann::json& js) {
    MotionInstance c;
    for (const auto& f : js.at("frames")) c.observed.push_back(io::json_mat(f, 3));
    c.joint_mask = io::json_mask(js.at("joint_mask"));
    c.w_temp = js.value("w_temp", 0.5);
    if (js.contains("gt")) {
      const auto& g = js.at("gt");
      const Index d = static_cast<Index>(g.at(0).size());
      c.gt = io::json_mat(g, d);
    }
    return c;
  }
  MotionProblem problem(const ArticulatedModel& model) const {
    return MotionProblem(model, observed, joint_mask, w_temp);
  }
};

inline MotionInstance make_motion_instance(const ArticulatedModel& model, const MixtureSpec& spec, Index frames,
                                           double noise_std, double ou_rate, Rng& rng) {
  MotionInstance c;
  c.gt = sample_gt_sequence(spec, frames, ou_rate, rng);
  c.joint_mask = MaskSpec(static_cast<std::size_t>(model.num_joints()), true);
  for (Index f = 0; f < frames; ++f) {
    Mat3X j = forward_kinematics(model, c.gt.col(f));
    for (Index i = 0; i < j.size(); ++i) j.data()[i] += noise_std * rng.normal();
    c.observed.push_back(std::move(j));
  }
  return c;
}

// Mean per-joint error over all frames (zero shape, identity transform) for
// problems whose measurements live in the root frame.
inline double joint_error(const ArticulatedModel& model, const Mat& poses, const Mat& gt) {
  require(poses.rows() == gt.rows() && poses.cols() == gt.cols(), "joint_error: shape mismatch");
  double acc = 0.0;
  for (Index f = 0; f < poses.cols(); ++f)
    acc += position_error(forward_kinematics(model, poses.col(f)), forward_kinematics(model, gt.col(f)));
  return acc / static_cast<double>(poses.cols());
}

// Mean per-joint error of a fitted sequence: joints at zero shape under the
// estimated per-frame global transforms against the ground-truth joints.
inline double motion_error(const ArticulatedModel& model, const Mat& poses, const Vec& aux, const Mat& gt) {
  require(poses.rows() == gt.rows() && poses.cols() == gt.cols(), "motion_error: shape mismatch");
  require(aux.size() == 0 || aux.size() == 6 * gt.cols(), "motion_error: aux size mismatch");
  const Vec shape = Vec::Zero(model.shape_dim());
  double acc = 0.0;
  for (Index f = 0; f < gt.cols(); ++f) {
    PoseParams p = PoseParams::from_vector(model, poses.col(f));
    if (aux.size()) {
      p.global_orient = aux.segment<3>(6 * f);
      p.translation = aux.segment<3>(6 * f + 3);
    }
    acc += position_error(forward_kinematics(model, p, shape), forward_kinematics(model, gt.col(f)));
  }
  return acc / static_cast<double>(gt.cols());
}

// Procrustes-aligned joint error of a 2D fit against the ground-truth joints.
inline double fit2d_error(const ArticulatedModel& model, const Fit2dInstance& inst, const Mat& poses, const Vec& aux) {
  require(inst.gt.size() > 0, "fit2d_error: instance has no ground truth");
  const Index ns = model.shape_dim();
  PoseParams p = PoseParams::from_vector(model, poses.col(0));
  p.global_orient = aux.segment<3>(ns);
  p.translation = aux.segment<3>(ns + 3);
  return position_error(forward_kinematics(model, p, aux.head(ns)), inst.gt_joints(model), true);
}

}  // namespace dpsr
