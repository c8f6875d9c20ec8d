#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpsr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Mat3X = Eigen::Matrix3Xd;
using Mat2X = Eigen::Matrix2Xd;
using Index = Eigen::Index;

// Caller supplied arguments that violate a precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Computation produced NaN/Inf or otherwise cannot continue.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or corrupted file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw UsageError(what);
}

inline void require_dims(Index got, Index want, const char* what) {
  if (got != want) {
    throw UsageError(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                     ", expected " + std::to_string(want) + ")");
  }
}

}  // namespace dpsr
