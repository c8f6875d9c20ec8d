#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "dpsr/composite/part_split.hpp"
#include "dpsr/core.hpp"
#include "dpsr/io/binary.hpp"
#include "dpsr/numerics/rng.hpp"
#include "json.hpp"

namespace dpsr {

struct MixtureComponent {
  double weight = 1.0;
  Vec mean;
  Vec std;  // diagonal; right-hand entries are ignored for mirrored components
  bool mirrored_hands = false;
};

// Gaussian mixture over whole pose vectors. A mirrored component draws its
// right hand as mirror(left hand) + N(0, mirror_noise^2).
struct MixtureSpec {
  PartSplit split;
  double mirror_noise = 0.05;
  std::vector<MixtureComponent> components;

  Index dim() const { return split.total(); }
  Index size() const { return static_cast<Index>(components.size()); }

  void validate() const {
    split.validate();
    require(!components.empty(), "mixture: no components");
    require(mirror_noise >= 0.0, "mixture: negative mirror noise");
    double total = 0.0;
    for (const auto& c : components) {
      require(c.weight >= 0.0, "mixture: negative weight");
      require_dims(c.mean.size(), dim(), "mixture component mean");
      require_dims(c.std.size(), dim(), "mixture component std");
      require(c.mean.allFinite() && (c.std.array() >= 0.0).all(), "mixture: invalid component moments");
      total += c.weight;
    }
    require(std::abs(total - 1.0) < 1e-9, "mixture: weights must sum to 1");
  }

  // Effective mean and full covariance of component k.
  Vec component_mean(Index k) const {
    const auto& c = components[static_cast<std::size_t>(k)];
    Vec m = c.mean;
    if (c.mirrored_hands) {
      const Block l = split[PartBlock::LeftHand], r = split[PartBlock::RightHand];
      m.segment(r.begin, r.size) = split.mirror_hand(c.mean.segment(l.begin, l.size));
    }
    return m;
  }

  Mat component_cov(Index k) const {
    const auto& c = components[static_cast<std::size_t>(k)];
    Mat cov = Mat::Zero(dim(), dim());
    cov.diagonal() = c.std.cwiseAbs2();
    if (c.mirrored_hands) {
      const Block l = split[PartBlock::LeftHand], r = split[PartBlock::RightHand];
      const Vec sl = c.std.segment(l.begin, l.size).cwiseAbs2();
      const Vec signs = split.hand_mirror_signs();
      cov.block(r.begin, r.begin, r.size, r.size) =
          (sl.array() + mirror_noise * mirror_noise).matrix().asDiagonal();
      cov.block(r.begin, l.begin, r.size, l.size) = sl.cwiseProduct(signs).asDiagonal();
      cov.block(l.begin, r.begin, l.size, r.size) = sl.cwiseProduct(signs).asDiagonal();
    }
    return cov;
  }

  nlohmann::json to_json() const {
    nlohmann::json js;
    js["dim"] = dim();
    js["split"] = split.to_json();
    js["mirror_noise"] = mirror_noise;
    auto& arr = js["components"] = nlohmann::json::array();
    for (const auto& c : components) {
      arr.push_back({{"weight", c.weight},
                     {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                     {"std", std::vector<double>(c.std.data(), c.std.data() + c.std.size())},
                     {"mirrored_hands", c.mirrored_hands}});
    }
    return js;
  }

  static MixtureSpec from_json(const nlohmann::json& js) {
    MixtureSpec s;
    s.split = PartSplit::from_json(js.at("split"));
    s.mirror_noise = js.value("mirror_noise", 0.05);
    for (const auto& item : js.at("components")) {
      MixtureComponent c;
      c.weight = item.at("weight").get<double>();
      const auto m = item.at("mean").get<std::vector<double>>();
      const auto sd = item.at("std").get<std::vector<double>>();
      c.mean = Eigen::Map<const Vec>(m.data(), static_cast<Index>(m.size()));
      c.std = Eigen::Map<const Vec>(sd.data(), static_cast<Index>(sd.size()));
      c.mirrored_hands = item.value("mirrored_hands", false);
      s.components.push_back(std::move(c));
    }
    try {
      s.validate();
    } catch (const UsageError& e) {
      throw FormatError(std::string("mixture spec: ") + e.what());
    }
    return s;
  }

  std::string hash() const {
    const std::string dump = to_json().dump();
    return hex_crc(std::vector<std::uint8_t>(dump.begin(), dump.end()));
  }
};

struct DefaultMixtureParams {
  std::uint64_t seed = 2024;
  Index components = 6;
  Index mirrored = 3;  // the first `mirrored` components get mirrored hands
  double body_std = 0.3;
  double hand_std = 0.2;
  double face_angle_std = 0.3;
  double expression_std = 0.5;
  double mean_spread = 0.5;             // std of angle means across components
  double expression_mean_spread = 1.0;  // std of expression means
  double mirror_noise = 0.05;

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"components", components},
            {"mirrored", mirrored},
            {"body_std", body_std},
            {"hand_std", hand_std},
            {"face_angle_std", face_angle_std},
            {"expression_std", expression_std},
            {"mean_spread", mean_spread},
            {"expression_mean_spread", expression_mean_spread},
            {"mirror_noise", mirror_noise}};
  }
  static DefaultMixtureParams from_json(const nlohmann::json& js) {
    DefaultMixtureParams p;
    p.seed = js.value("seed", p.seed);
    p.components = js.value("components", p.components);
    p.mirrored = js.value("mirrored", p.mirrored);
    p.body_std = js.value("body_std", p.body_std);
    p.hand_std = js.value("hand_std", p.hand_std);
    p.face_angle_std = js.value("face_angle_std", p.face_angle_std);
    p.expression_std = js.value("expression_std", p.expression_std);
    p.mean_spread = js.value("mean_spread", p.mean_spread);
    p.expression_mean_spread = js.value("expression_mean_spread", p.expression_mean_spread);
    p.mirror_noise = js.value("mirror_noise", p.mirror_noise);
    return p;
  }
};

inline MixtureSpec make_default_mixture(const ArticulatedModel& model, const DefaultMixtureParams& p = {}) {
  require(p.components >= 1 && p.mirrored >= 0 && p.mirrored <= p.components, "default mixture: bad counts");
  MixtureSpec s;
  s.split = PartSplit::from_model(model);
  s.mirror_noise = p.mirror_noise;
  Rng rng(p.seed);
  const Index d = s.dim();
  const Block face = s.split[PartBlock::Face];
  const Index expr_begin = face.end() - model.expression_count();
  Vec weights(p.components);
  for (Index k = 0; k < p.components; ++k) weights[k] = 1.0 + rng.uniform();
  weights /= weights.sum();
  for (Index k = 0; k < p.components; ++k) {
    MixtureComponent c;
    c.weight = weights[k];
    c.mean.resize(d);
    c.std.resize(d);
    for (Index i = 0; i < d; ++i) {
      const bool expr = i >= expr_begin;
      c.mean[i] = (expr ? p.expression_mean_spread : p.mean_spread) * rng.normal();
      if (expr) {
        c.std[i] = p.expression_std;
      } else if (i >= face.begin) {
        c.std[i] = p.face_angle_std;
      } else if (i >= s.split[PartBlock::LeftHand].begin) {
        c.std[i] = p.hand_std;
      } else {
        c.std[i] = p.body_std;
      }
    }
    c.mirrored_hands = k < p.mirrored;
    s.components.push_back(std::move(c));
  }
  // Exact unit total after normalization round-off.
  double rest = 1.0;
  for (std::size_t k = 0; k + 1 < s.components.size(); ++k) rest -= s.components[k].weight;
  s.components.back().weight = rest;
  s.validate();
  return s;
}

inline Vec sample_component(const MixtureSpec& spec, Index k, Rng& rng) {
  const auto& c = spec.components[static_cast<std::size_t>(k)];
  Vec x(spec.dim());
  for (Index i = 0; i < x.size(); ++i) x[i] = c.mean[i] + c.std[i] * rng.normal();
  if (c.mirrored_hands) {
    const Block l = spec.split[PartBlock::LeftHand], r = spec.split[PartBlock::RightHand];
    Vec rh = spec.split.mirror_hand(x.segment(l.begin, l.size));
    for (Index i = 0; i < rh.size(); ++i) rh[i] += spec.mirror_noise * rng.normal();
    x.segment(r.begin, r.size) = rh;
  }
  return x;
}

inline Vec component_weights(const MixtureSpec& spec) {
  Vec w(spec.size());
  for (Index k = 0; k < spec.size(); ++k) w[k] = spec.components[static_cast<std::size_t>(k)].weight;
  return w;
}

inline Vec sample_gt_pose(const MixtureSpec& spec, Rng& rng, Index* component = nullptr) {
  const Index k = rng.categorical(component_weights(spec));
  if (component) *component = k;
  return sample_component(spec, k, rng);
}

// Discrete Ornstein-Uhlenbeck path around one component mean:
//   x_f = x_{f-1} + rate (m - x_{f-1}) + step_scale L z,   L L^T = Sigma_k,
// started from a component draw x_{-1}. Columns are frames.
inline Mat sample_gt_sequence(const MixtureSpec& spec, Index frames, double rate, Rng& rng,
                              double step_scale = 0.2, Index* component = nullptr) {
  require(frames >= 2, "sample_gt_sequence: need at least two frames");
  require(rate >= 0.0 && rate <= 1.0, "sample_gt_sequence: rate must lie in [0, 1]");
  const Index k = rng.categorical(component_weights(spec));
  if (component) *component = k;
  const Vec m = spec.component_mean(k);
  const Mat chol = Eigen::LLT<Mat>(spec.component_cov(k) + 1e-14 * Mat::Identity(spec.dim(), spec.dim())).matrixL();
  Vec x = sample_component(spec, k, rng);
  Mat out(spec.dim(), frames);
  for (Index f = 0; f < frames; ++f) {
    Vec z(spec.dim());
    for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    x += rate * (m - x) + step_scale * (chol * z);
    out.col(f) = x;
  }
  return out;
}

// Exact log density of the mixture (full covariance per component).
inline double mixture_log_density(const MixtureSpec& spec, const Vec& x) {
  require_dims(x.size(), spec.dim(), "mixture_log_density");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  for (Index k = 0; k < spec.size(); ++k) {
    const double w = spec.components[static_cast<std::size_t>(k)].weight;
    if (w <= 0.0) continue;
    Eigen::LLT<Mat> llt(spec.component_cov(k));
    if (llt.info() != Eigen::Success) throw UsageError("mixture_log_density: singular component covariance");
    const Vec r = llt.matrixL().solve(x - spec.component_mean(k));
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double lp = std::log(w) - 0.5 * (r.squaredNorm() + logdet + spec.dim() * std::log(2.0 * std::numbers::pi));
    terms.push_back(lp);
    best = std::max(best, lp);
  }
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - best);
  return best + std::log(acc);
}

}  // namespace dpsr
