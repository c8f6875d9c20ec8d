#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/numerics/rng.hpp"
#include "json.hpp"

namespace dpsr {

enum class Part { Body, LeftHand, RightHand, Face };

inline const char* part_name(Part p) {
  switch (p) {
    case Part::Body: return "body";
    case Part::LeftHand: return "left_hand";
    case Part::RightHand: return "right_hand";
    case Part::Face: return "face";
  }
  return "body";
}

inline Part part_from_name(const std::string& s) {
  if (s == "body") return Part::Body;
  if (s == "left_hand") return Part::LeftHand;
  if (s == "right_hand") return Part::RightHand;
  if (s == "face") return Part::Face;
  throw FormatError("unknown part label '" + s + "'");
}

struct Joint {
  std::string name;
  int parent = -1;  // -1 for the root
  Vec3 offset = Vec3::Zero();
  Part part = Part::Body;
};

// Kinematic tree plus the fixed expression displacement basis. Joint order
// is topological: every parent index is smaller than its child's.
class ArticulatedModel {
 public:
  static constexpr int kModelVersion = 1;

  ArticulatedModel() = default;
  ArticulatedModel(std::vector<Joint> joints, int expression_count, std::uint64_t expression_seed,
                   double expression_scale)
      : joints_(std::move(joints)),
        expression_count_(expression_count),
        expression_seed_(expression_seed),
        expression_scale_(expression_scale) {
    validate();
    build_expression_basis();
  }

  Index num_joints() const { return static_cast<Index>(joints_.size()); }
  Index num_bones() const { return num_joints() - 1; }
  Index expression_count() const { return expression_count_; }
  Index pose_dim() const { return 3 * num_joints() + expression_count_; }
  Index shape_dim() const { return num_bones(); }
  std::uint64_t expression_seed() const { return expression_seed_; }
  double expression_scale() const { return expression_scale_; }

  const std::vector<Joint>& joints() const { return joints_; }
  const Joint& joint(Index j) const { return joints_[static_cast<std::size_t>(j)]; }
  const std::vector<Index>& face_joints() const { return face_joints_; }
  // Position of joint j within face_joints(), or -1.
  Index face_slot(Index j) const { return face_slot_[static_cast<std::size_t>(j)]; }
  // (3 * #face joints) x expression_count, orthonormal columns.
  const Mat& expression_basis() const { return expression_basis_; }

  std::vector<Index> joints_of(Part p) const {
    std::vector<Index> out;
    for (Index j = 0; j < num_joints(); ++j)
      if (joint(j).part == p) out.push_back(j);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json js;
    js["model_version"] = kModelVersion;
    js["expression"] = {{"count", expression_count_}, {"seed", expression_seed_}, {"scale", expression_scale_}};
    auto& arr = js["joints"] = nlohmann::json::array();
    for (const auto& j : joints_) {
      arr.push_back({{"name", j.name},
                     {"parent", j.parent},
                     {"offset", {j.offset.x(), j.offset.y(), j.offset.z()}},
                     {"part", part_name(j.part)}});
    }
    return js;
  }

  static ArticulatedModel from_json(const nlohmann::json& js) {
    if (!js.contains("model_version") || js.at("model_version").get<int>() != kModelVersion) {
      throw FormatError("model description: unsupported or missing model_version");
    }
    std::vector<Joint> joints;
    for (const auto& item : js.at("joints")) {
      Joint j;
      j.name = item.at("name").get<std::string>();
      j.parent = item.at("parent").get<int>();
      const auto off = item.at("offset").get<std::vector<double>>();
      if (off.size() != 3) throw FormatError("model description: offset must have 3 entries");
      j.offset = Vec3(off[0], off[1], off[2]);
      j.part = part_from_name(item.at("part").get<std::string>());
      joints.push_back(std::move(j));
    }
    const auto& ex = js.at("expression");
    try {
      return ArticulatedModel(std::move(joints), ex.at("count").get<int>(), ex.at("seed").get<std::uint64_t>(),
                              ex.at("scale").get<double>());
    } catch (const UsageError& e) {
      throw FormatError(std::string("model description: ") + e.what());
    }
  }

 private:
  void validate() {
    require(!joints_.empty(), "kinematic tree: no joints");
    require(joints_[0].parent == -1, "kinematic tree: joint 0 must be the root");
    face_slot_.assign(joints_.size(), -1);
    for (std::size_t j = 0; j < joints_.size(); ++j) {
      const auto& jt = joints_[j];
      if (j > 0) {
        require(jt.parent >= 0, "kinematic tree: more than one root");
        require(static_cast<std::size_t>(jt.parent) < j, "kinematic tree: parent index must precede child");
      }
      require(jt.offset.allFinite(), "kinematic tree: non-finite offset");
      if (jt.part == Part::Face) {
        require(j > 0, "kinematic tree: root cannot be a face joint");
        face_slot_[j] = static_cast<Index>(face_joints_.size());
        face_joints_.push_back(static_cast<Index>(j));
      }
    }
    require(expression_count_ >= 0, "kinematic tree: negative expression count");
    require(expression_count_ == 0 || !face_joints_.empty(), "kinematic tree: expressions need face joints");
    require(expression_count_ <= 3 * static_cast<Index>(face_joints_.size()),
            "kinematic tree: too many expression coefficients for the face joints");
  }

  void build_expression_basis() {
    const Index rows = 3 * static_cast<Index>(face_joints_.size());
    if (expression_count_ == 0) {
      expression_basis_ = Mat::Zero(rows, 0);
      return;
    }
    Rng rng(expression_seed_);
    const Mat g = gaussian_matrix(rng, rows, expression_count_);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(rows, expression_count_);
    // Fix the sign convention so the basis does not depend on QR internals.
    const Mat r = qr.matrixQR().topRows(expression_count_).triangularView<Eigen::Upper>();
    for (Index k = 0; k < expression_count_; ++k)
      if (r(k, k) < 0) q.col(k) *= -1.0;
    expression_basis_ = q;
  }

  std::vector<Joint> joints_;
  Index expression_count_ = 0;
  std::uint64_t expression_seed_ = 0;
  double expression_scale_ = 1.0;
  std::vector<Index> face_joints_;
  std::vector<Index> face_slot_;
  Mat expression_basis_;
};

// Upper-body figure: 11 body joints, two 6-joint hands (mirror images in x),
// 3 face joints carrying 4 expression coefficients.
inline ArticulatedModel default_model() {
  std::vector<Joint> j;
  auto add = [&j](std::string name, int parent, Vec3 off, Part part) {
    j.push_back({std::move(name), parent, off, part});
    return static_cast<int>(j.size()) - 1;
  };
  const int pelvis = add("pelvis", -1, {0.0, 0.9, 0.0}, Part::Body);
  const int spine = add("spine", pelvis, {0.0, 0.2, 0.0}, Part::Body);
  const int chest = add("chest", spine, {0.0, 0.22, 0.0}, Part::Body);
  const int neck = add("neck", chest, {0.0, 0.18, 0.0}, Part::Body);
  const int head = add("head", neck, {0.0, 0.12, 0.02}, Part::Body);
  int wrist[2] = {0, 0};
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string p = side == 0 ? "l_" : "r_";
    const int shoulder = add(p + "shoulder", chest, {sx * 0.17, 0.12, 0.0}, Part::Body);
    const int elbow = add(p + "elbow", shoulder, {sx * 0.28, 0.0, 0.0}, Part::Body);
    wrist[side] = add(p + "wrist", elbow, {sx * 0.25, 0.0, 0.0}, Part::Body);
  }
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string p = side == 0 ? "l_" : "r_";
    const Part part = side == 0 ? Part::LeftHand : Part::RightHand;
    const int palm = add(p + "palm", wrist[side], {sx * 0.07, 0.0, 0.0}, part);
    const int index1 = add(p + "index1", palm, {sx * 0.04, 0.0, 0.01}, part);
    const int index2 = add(p + "index2", index1, {sx * 0.03, 0.0, 0.0}, part);
    add(p + "index3", index2, {sx * 0.025, 0.0, 0.0}, part);
    const int thumb1 = add(p + "thumb1", palm, {sx * 0.01, -0.01, 0.035}, part);
    add(p + "thumb2", thumb1, {sx * 0.02, 0.0, 0.025}, part);
  }
  add("jaw", head, {0.0, -0.06, 0.07}, Part::Face);
  add("l_eye", head, {0.03, 0.04, 0.08}, Part::Face);
  add("r_eye", head, {-0.03, 0.04, 0.08}, Part::Face);
  return ArticulatedModel(std::move(j), 4, 0x45585052ULL /* "EXPR" */, 0.05);
}

}  // namespace dpsr
