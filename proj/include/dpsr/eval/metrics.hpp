#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpsr/core.hpp"
#include "dpsr/kinematics/fk.hpp"
#include "dpsr/numerics/sym_sqrt.hpp"

namespace dpsr {

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

struct ProcrustesResult {
  Mat3X aligned;
  SimilarityTransform transform;
};

// Least-squares similarity s R X + t ~ Y (Umeyama), with det(R) = +1.
inline ProcrustesResult procrustes_align(const Mat3X& x, const Mat3X& y) {
  require(x.cols() == y.cols(), "procrustes_align: point counts differ");
  require(x.cols() >= 3, "procrustes_align: need at least 3 points");
  const double n = static_cast<double>(x.cols());
  const Vec3 mx = x.rowwise().mean(), my = y.rowwise().mean();
  const Mat3X xc = x.colwise() - mx, yc = y.colwise() - my;
  const double var_x = xc.squaredNorm() / n;
  const Eigen::JacobiSVD<Mat3> xsvd(xc * xc.transpose());
  const Vec3 xs = xsvd.singularValues();
  if (!(xs[0] > 0.0) || xs[1] <= 1e-12 * xs[0]) throw UsageError("procrustes_align: degenerate source points (rank < 2)");
  const Mat3 cov = yc * xc.transpose() / n;
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  ProcrustesResult r;
  r.transform.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  r.transform.scale = (svd.singularValues().asDiagonal() * s).trace() / var_x;
  r.transform.translation = my - r.transform.scale * r.transform.rotation * mx;
  r.aligned = (r.transform.scale * r.transform.rotation * x).colwise() + r.transform.translation;
  return r;
}

// Mean Euclidean distance between corresponding points.
inline double position_error(const Mat3X& pred, const Mat3X& gt, bool aligned = false) {
  require(pred.cols() == gt.cols() && pred.cols() >= 1, "position_error: shape mismatch");
  const Mat3X p = aligned ? procrustes_align(pred, gt).aligned : pred;
  return (p - gt).colwise().norm().mean();
}

// Joints of every column of a raw pose matrix at zero shape, stacked 3J x n.
inline Mat pose_joint_features(const ArticulatedModel& model, const Mat& poses) {
  require_dims(poses.rows(), model.pose_dim(), "pose_joint_features");
  Mat out(3 * model.num_joints(), poses.cols());
  for (Index i = 0; i < poses.cols(); ++i) {
    const Mat3X j = forward_kinematics(model, poses.col(i));
    out.col(i) = Eigen::Map<const Vec>(j.data(), j.size());
  }
  return out;
}

// Mean per-joint distance between two stacked joint columns.
inline double mean_joint_distance(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  const Eigen::Map<const Mat3X> ja(a.data(), 3, a.size() / 3), jb(b.data(), 3, b.size() / 3);
  return (ja - jb).colwise().norm().mean();
}

// Average pairwise distance over unordered pairs of solutions (raw poses).
inline double apd_joints(const Mat& joints) {
  require(joints.cols() >= 2, "apd: need at least two solutions");
  double acc = 0.0;
  Index pairs = 0;
  for (Index i = 0; i < joints.cols(); ++i)
    for (Index j = i + 1; j < joints.cols(); ++j, ++pairs) acc += mean_joint_distance(joints.col(i), joints.col(j));
  return acc / static_cast<double>(pairs);
}

inline double apd(const Mat& solutions, const ArticulatedModel& model) {
  return apd_joints(pose_joint_features(model, solutions));
}

// Mean distance from each sample to its nearest training item, in joint space.
inline double d_nn_joints(const Mat& samples, const Mat& train) {
  require(samples.cols() >= 1 && train.cols() >= 1, "d_nn: empty set");
  require_dims(samples.rows(), train.rows(), "d_nn feature");
  double acc = 0.0;
  for (Index i = 0; i < samples.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < train.cols(); ++j) best = std::min(best, mean_joint_distance(samples.col(i), train.col(j)));
    acc += best;
  }
  return acc / static_cast<double>(samples.cols());
}

inline double d_nn(const Mat& samples, const Mat& train, const ArticulatedModel& model) {
  return d_nn_joints(pose_joint_features(model, samples), pose_joint_features(model, train));
}

inline Mat sample_covariance(const Mat& x, Vec* mean = nullptr) {
  const Vec m = x.rowwise().mean();
  const Mat c = x.colwise() - m;
  if (mean) *mean = m;
  return c * c.transpose() / static_cast<double>(x.cols() - 1);
}

// Frechet distance between Gaussian fits of two feature sets (columns).
// Sets not larger than the dimension, or with singular covariance, get a
// 1e-8 I ridge and a warning.
inline double fid(const Mat& a, const Mat& b, bool* regularized = nullptr) {
  require_dims(a.rows(), b.rows(), "fid feature");
  require(a.cols() >= 2 && b.cols() >= 2, "fid: need at least two samples per set");
  Vec ma, mb;
  Mat sa = sample_covariance(a, &ma), sb = sample_covariance(b, &mb);
  const Index d = a.rows();
  bool ridge = a.cols() <= d || b.cols() <= d;
  if (!ridge) {
    const SymEigen ea = jacobi_eigen(sa), eb = jacobi_eigen(sb);
    const double tol = 1e-12 * std::max(1.0, std::max(ea.values.maxCoeff(), eb.values.maxCoeff()));
    ridge = ea.values.minCoeff() <= tol || eb.values.minCoeff() <= tol;
  }
  if (ridge) {
    sa.diagonal().array() += 1e-8;
    sb.diagonal().array() += 1e-8;
    std::cerr << "warning: fid covariance is rank deficient; added 1e-8 I\n";
  }
  if (regularized) *regularized = ridge;
  const Mat ra = sym_psd_sqrt(sa);
  Mat inner = ra * sb * ra;
  inner = 0.5 * (inner + inner.transpose());
  const double tr = sa.trace() + sb.trace() - 2.0 * sym_psd_sqrt(inner).trace();
  return (ma - mb).squaredNorm() + tr;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

namespace detail {
// Distance from each column to its k-th nearest other column.
inline Vec kth_nn_radius(const Mat& x, Index k) {
  Vec r(x.cols());
  std::vector<double> dist(static_cast<std::size_t>(x.cols()));
  for (Index i = 0; i < x.cols(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) dist[static_cast<std::size_t>(j)] = (x.col(i) - x.col(j)).norm();
    // index k skips the zero self-distance
    std::nth_element(dist.begin(), dist.begin() + k, dist.end());
    r[i] = dist[static_cast<std::size_t>(k)];
  }
  return r;
}

inline double coverage(const Mat& support, const Vec& radius, const Mat& query) {
  Index inside = 0;
  for (Index i = 0; i < query.cols(); ++i) {
    for (Index j = 0; j < support.cols(); ++j) {
      if ((query.col(i) - support.col(j)).norm() <= radius[j]) {
        ++inside;
        break;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(query.cols());
}
}  // namespace detail

// k-NN manifold precision (generated inside real support) and recall
// (real inside generated support).
inline PrecisionRecall precision_recall(const Mat& gen, const Mat& real, Index k = 3) {
  require_dims(gen.rows(), real.rows(), "precision_recall feature");
  require(k >= 1, "precision_recall: k must be >= 1");
  require(k < gen.cols() && k < real.cols(), "precision_recall: k must be smaller than both set sizes");
  PrecisionRecall pr;
  pr.precision = detail::coverage(real, detail::kth_nn_radius(real, k), gen);
  pr.recall = detail::coverage(gen, detail::kth_nn_radius(gen, k), real);
  return pr;
}

struct MetricReport {
  std::map<std::string, double> values;
  std::map<std::string, std::string> units;
  std::map<std::string, Index> counts;

  void set(const std::string& name, double v, const std::string& unit, Index count) {
    values[name] = v;
    units[name] = unit;
    counts[name] = count;
  }

  void validate() const {
    for (const auto& [k, v] : values) {
      if (!std::isfinite(v)) throw NumericError("metric '" + k + "' is not finite");
      if ((k == "precision" || k == "recall") && (v < 0.0 || v > 1.0))
        throw NumericError("metric '" + k + "' outside [0, 1]");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json js = nlohmann::json::object();
    for (const auto& [k, v] : values) js[k] = {{"value", v}, {"unit", units.at(k)}, {"count", counts.at(k)}};
    return js;
  }

  std::string csv_header() const {
    std::string h;
    for (const auto& [k, v] : values) h += (h.empty() ? "" : ",") + k;
    return h;
  }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [k, v] : values) {
      os << (first ? "" : ",") << v;
      first = false;
    }
    return os.str();
  }
};

}  // namespace dpsr
