#pragma once

#include <array>
#include <cmath>

#include "dpsr/core.hpp"

namespace dpsr {

// Forward-mode number carrying three partials; only what rodrigues needs.
struct Dual3 {
  double v = 0.0;
  std::array<double, 3> d{0.0, 0.0, 0.0};

  Dual3() = default;
  Dual3(double value) : v(value) {}  // NOLINT: implicit constants
  Dual3(double value, int seed) : v(value) { d[static_cast<std::size_t>(seed)] = 1.0; }

  friend Dual3 operator+(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v + b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual3 operator-(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v - b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual3 operator-(const Dual3& a) { return Dual3(0.0) - a; }
  friend Dual3 operator*(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v * b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual3 operator/(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v / b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) / (b.v * b.v);
    return r;
  }
  friend Dual3 sin(const Dual3& a) {
    Dual3 r(std::sin(a.v));
    const double c = std::cos(a.v);
    for (int i = 0; i < 3; ++i) r.d[i] = c * a.d[i];
    return r;
  }
  friend Dual3 cos(const Dual3& a) {
    Dual3 r(std::cos(a.v));
    const double s = -std::sin(a.v);
    for (int i = 0; i < 3; ++i) r.d[i] = s * a.d[i];
    return r;
  }
  friend Dual3 sqrt(const Dual3& a) {
    Dual3 r(std::sqrt(a.v));
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] / (2.0 * r.v);
    return r;
  }
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual3& x) { return x.v; }

inline constexpr double kSmallAngle = 1e-8;

// Axis-angle to rotation matrix, generic over the scalar so that the same
// code yields the Jacobian when evaluated on Dual3.
template <class T>
std::array<T, 9> rodrigues_generic(const T& x, const T& y, const T& z) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T sq = x * x + y * y + z * z;
  T a, b;  // R = I + a K + b K^2
  if (value_of(sq) < kSmallAngle * kSmallAngle) {
    a = T(1.0);
    b = T(0.5);
  } else {
    const T theta = sqrt(sq);
    const T half = sin(theta * T(0.5));
    a = sin(theta) / theta;
    b = T(2.0) * half * half / sq;
  }
  // K = [[0,-z,y],[z,0,-x],[-y,x,0]]
  const T xx = x * x, yy = y * y, zz = z * z, xy = x * y, xz = x * z, yz = y * z;
  std::array<T, 9> r;  // row-major
  r[0] = T(1.0) - b * (yy + zz);
  r[1] = -a * z + b * xy;
  r[2] = a * y + b * xz;
  r[3] = a * z + b * xy;
  r[4] = T(1.0) - b * (xx + zz);
  r[5] = -a * x + b * yz;
  r[6] = -a * y + b * xz;
  r[7] = a * x + b * yz;
  r[8] = T(1.0) - b * (xx + yy);
  return r;
}

inline Mat3 rodrigues(const Vec3& aa) {
  const auto r = rodrigues_generic<double>(aa.x(), aa.y(), aa.z());
  Mat3 m;
  m << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  return m;
}

struct RotationWithJacobian {
  Mat3 rotation;
  std::array<Mat3, 3> partials;  // d rotation / d aa_k
};

inline RotationWithJacobian rodrigues_with_jacobian(const Vec3& aa) {
  const auto r = rodrigues_generic<Dual3>(Dual3(aa.x(), 0), Dual3(aa.y(), 1), Dual3(aa.z(), 2));
  RotationWithJacobian out;
  for (int i = 0; i < 9; ++i) {
    out.rotation(i / 3, i % 3) = r[i].v;
    for (int k = 0; k < 3; ++k) out.partials[k](i / 3, i % 3) = r[i].d[k];
  }
  return out;
}

// Gradient w.r.t. aa of sum(adj .* R(aa)).
inline Vec3 rodrigues_vjp(const RotationWithJacobian& rj, const Mat3& adj) {
  return {rj.partials[0].cwiseProduct(adj).sum(), rj.partials[1].cwiseProduct(adj).sum(),
          rj.partials[2].cwiseProduct(adj).sum()};
}

}  // namespace dpsr
