#pragma once

#include <cmath>
#include <utility>

#include "dpsr/core.hpp"

namespace dpsr {

struct SymEigen {
  Vec values;
  Mat vectors;  // columns are eigenvectors
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline SymEigen jacobi_eigen(const Mat& input, int max_sweeps = 100) {
  require(input.rows() == input.cols(), "jacobi_eigen: matrix must be square");
  const Index n = input.rows();
  Mat a = input;
  Mat v = Mat::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  return {a.diagonal(), v};
}

// Principal square root of a symmetric PSD matrix. Eigenvalues down to
// -1e-10 (relative to the largest magnitude) are clamped to zero.
inline Mat sym_psd_sqrt(const Mat& m) {
  require(m.rows() == m.cols(), "sym_psd_sqrt: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw UsageError("sym_psd_sqrt: input is not symmetric");
  }
  const Mat sym = 0.5 * (m + m.transpose());
  auto eig = jacobi_eigen(sym);
  Vec root(eig.values.size());
  for (Index i = 0; i < root.size(); ++i) {
    const double lambda = eig.values[i];
    if (lambda < -1e-10 * scale) throw UsageError("sym_psd_sqrt: matrix is not positive semidefinite");
    root[i] = std::sqrt(std::max(lambda, 0.0));
  }
  return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

}  // namespace dpsr
