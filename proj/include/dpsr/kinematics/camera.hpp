#pragma once

#include <string>

#include "dpsr/core.hpp"

namespace dpsr {

struct Camera {
  double focal = 1000.0;  // pixels
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();  // camera-from-world
  Vec3 translation = Vec3::Zero();
};

class NonPositiveDepth : public NumericError {
 public:
  NonPositiveDepth(Index index, double depth)
      : NumericError("point " + std::to_string(index) + " has non-positive camera depth " + std::to_string(depth)),
        index_(index) {}
  Index index() const { return index_; }

 private:
  Index index_;
};

inline constexpr double kMinDepth = 1e-6;

inline Mat2X project_perspective(const Camera& cam, const Mat3X& points) {
  require(cam.focal > 0.0, "camera focal length must be positive");
  Mat2X uv(2, points.cols());
  for (Index i = 0; i < points.cols(); ++i) {
    const Vec3 p = cam.rotation * points.col(i) + cam.translation;
    if (!(p.z() > kMinDepth)) throw NonPositiveDepth(i, p.z());
    uv(0, i) = cam.focal * p.x() / p.z() + cam.cx;
    uv(1, i) = cam.focal * p.y() / p.z() + cam.cy;
  }
  return uv;
}

// Gradient of sum(adj_uv .* project(points)) w.r.t. the world points.
inline Mat3X project_perspective_backward(const Camera& cam, const Mat3X& points, const Mat2X& adj_uv) {
  require_dims(adj_uv.cols(), points.cols(), "projection adjoint");
  Mat3X out(3, points.cols());
  for (Index i = 0; i < points.cols(); ++i) {
    const Vec3 p = cam.rotation * points.col(i) + cam.translation;
    if (!(p.z() > kMinDepth)) throw NonPositiveDepth(i, p.z());
    const double iz = 1.0 / p.z();
    const double gu = adj_uv(0, i), gv = adj_uv(1, i);
    const Vec3 adj_cam(cam.focal * iz * gu, cam.focal * iz * gv,
                       -cam.focal * iz * iz * (p.x() * gu + p.y() * gv));
    out.col(i) = cam.rotation.transpose() * adj_cam;
  }
  return out;
}

}  // namespace dpsr
