#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/synthdata/mixture.hpp"

namespace dpsr {

class ImprobableObservation : public NumericError {
 public:
  using NumericError::NumericError;
};

struct ConditionalPosterior {
  Mat samples;           // d x n; observed entries equal the observation
  Vec mean;              // overall posterior mean
  Vec responsibilities;  // per component
};

// Exact conditional of the mixture given x[observed] = values.
inline ConditionalPosterior conditional_oracle(const MixtureSpec& spec, const std::vector<Index>& observed,
                                               const Vec& values, Index n, Rng& rng) {
  require(!observed.empty(), "conditional_oracle: no observed dimensions");
  require_dims(values.size(), static_cast<Index>(observed.size()), "conditional_oracle values");
  require(values.allFinite(), "conditional_oracle: non-finite observation");
  const Index d = spec.dim();
  std::vector<bool> is_obs(static_cast<std::size_t>(d), false);
  for (Index i : observed) {
    require(i >= 0 && i < d, "conditional_oracle: observed index out of range");
    is_obs[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> unobserved;
  for (Index i = 0; i < d; ++i)
    if (!is_obs[static_cast<std::size_t>(i)]) unobserved.push_back(i);
  const auto no = static_cast<Index>(observed.size());
  const auto nu = static_cast<Index>(unobserved.size());

  const Index K = spec.size();
  Vec logw = Vec::Constant(K, -std::numeric_limits<double>::infinity());
  std::vector<Vec> cond_mean(static_cast<std::size_t>(K));
  std::vector<Mat> cond_chol(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    const double w = spec.components[static_cast<std::size_t>(k)].weight;
    const Vec mu = spec.component_mean(k);
    const Mat cov = spec.component_cov(k);
    Mat s_oo(no, no), s_uo(nu, no), s_uu(nu, nu);
    Vec mu_o(no), mu_u(nu);
    for (Index a = 0; a < no; ++a) {
      mu_o[a] = mu[observed[a]];
      for (Index b = 0; b < no; ++b) s_oo(a, b) = cov(observed[a], observed[b]);
    }
    for (Index a = 0; a < nu; ++a) {
      mu_u[a] = mu[unobserved[a]];
      for (Index b = 0; b < no; ++b) s_uo(a, b) = cov(unobserved[a], observed[b]);
      for (Index b = 0; b < nu; ++b) s_uu(a, b) = cov(unobserved[a], unobserved[b]);
    }
    s_oo.diagonal().array() += 1e-12;
    Eigen::LLT<Mat> llt(s_oo);
    if (llt.info() != Eigen::Success) throw UsageError("conditional_oracle: singular observed covariance");
    const Vec resid = values - mu_o;
    const Vec white = llt.matrixL().solve(resid);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    if (w > 0.0) {
      logw[k] = std::log(w) - 0.5 * (white.squaredNorm() + logdet + no * std::log(2.0 * std::numbers::pi));
    }
    cond_mean[static_cast<std::size_t>(k)] = mu_u + s_uo * llt.solve(resid);
    Mat cc = s_uu - s_uo * llt.solve(s_uo.transpose());
    cc = 0.5 * (cc + cc.transpose());
    cc.diagonal().array() += 1e-12;
    cond_chol[static_cast<std::size_t>(k)] = Eigen::LLT<Mat>(cc).matrixL();
  }
  const double best = logw.maxCoeff();
  // every component likelihood underflows in linear space
  if (!(best >= std::log(std::numeric_limits<double>::min())))
    throw ImprobableObservation("conditional_oracle: observation has zero likelihood under every component");
  Vec resp = (logw.array() - best).exp();
  resp /= resp.sum();

  ConditionalPosterior post;
  post.responsibilities = resp;
  post.mean = Vec::Zero(d);
  for (Index a = 0; a < no; ++a) post.mean[observed[a]] = values[a];
  for (Index k = 0; k < K; ++k)
    for (Index a = 0; a < nu; ++a) post.mean[unobserved[a]] += resp[k] * cond_mean[static_cast<std::size_t>(k)][a];

  post.samples.resize(d, n);
  for (Index j = 0; j < n; ++j) {
    const Index k = rng.categorical(resp);
    Vec z(nu);
    for (Index a = 0; a < nu; ++a) z[a] = rng.normal();
    const Vec u = cond_mean[static_cast<std::size_t>(k)] + cond_chol[static_cast<std::size_t>(k)] * z;
    for (Index a = 0; a < no; ++a) post.samples(observed[a], j) = values[a];
    for (Index a = 0; a < nu; ++a) post.samples(unobserved[a], j) = u[a];
  }
  return post;
}

// Minimum-MSE noise predictor for data drawn from a mixture, evaluated in
// the normalized space defined by `stats`:
//   eps*(x_t, t) = (x_t - alpha_t E[x0 | x_t]) / sigma_t.
class MixtureOptimalPredictor : public NoisePredictor {
 public:
  MixtureOptimalPredictor(const MixtureSpec& spec, const NormStats& stats, const Schedule& schedule)
      : stats_(stats), schedule_(schedule) {
    spec.validate();
    require_dims(stats.dim(), spec.dim(), "optimal predictor stats");
    const Vec inv = stats.std.cwiseInverse();
    for (Index k = 0; k < spec.size(); ++k) {
      Comp c;
      c.log_weight = std::log(std::max(spec.components[static_cast<std::size_t>(k)].weight, 1e-300));
      c.mean = (spec.component_mean(k) - stats.mean).cwiseProduct(inv);
      const Mat cov = inv.asDiagonal() * spec.component_cov(k) * inv.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Mat> es(cov);
      c.evals = es.eigenvalues().cwiseMax(0.0);
      c.evecs = es.eigenvectors();
      comps_.push_back(std::move(c));
    }
  }

  Index dim() const override { return stats_.dim(); }
  const NormStats& stats() const override { return stats_; }
  const Schedule& schedule() const override { return schedule_; }
  using NoisePredictor::predict;

  Mat predict(const Mat& xt, const Vec& t) const override {
    require_dims(xt.rows(), dim(), "optimal predictor input");
    Mat out(xt.rows(), xt.cols());
    for (Index j = 0; j < xt.cols(); ++j) out.col(j) = predict_one(xt.col(j), t[j]);
    return out;
  }

  // Posterior mean E[x0 | x_t] in normalized space.
  Vec posterior_mean(const Vec& xt, double t) const {
    const double a = schedule_.alpha(t), s = schedule_.sigma(t);
    const std::size_t K = comps_.size();
    std::vector<double> logp(K);
    std::vector<Vec> means(K);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const Comp& c = comps_[k];
      const Vec var = (a * a) * c.evals.array() + s * s;  // marginal covariance eigenvalues
      const Vec r = c.evecs.transpose() * (xt - a * c.mean);
      logp[k] = c.log_weight - 0.5 * (r.cwiseAbs2().cwiseQuotient(var).sum() + var.array().log().sum());
      means[k] = c.mean + c.evecs * (a * c.evals.cwiseProduct(r).cwiseQuotient(var));
      best = std::max(best, logp[k]);
    }
    Vec m = Vec::Zero(xt.size());
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double w = std::exp(logp[k] - best);
      m += w * means[k];
      z += w;
    }
    return m / z;
  }

 private:
  struct Comp {
    double log_weight;
    Vec mean;
    Vec evals;
    Mat evecs;
  };

  Vec predict_one(const Vec& xt, double t) const {
    const double a = schedule_.alpha(t), s = schedule_.sigma(t);
    require(s > 0.0, "optimal predictor: t must be positive");
    return (xt - a * posterior_mean(xt, t)) / s;
  }

  NormStats stats_;
  Schedule schedule_;
  std::vector<Comp> comps_;
};

}  // namespace dpsr
