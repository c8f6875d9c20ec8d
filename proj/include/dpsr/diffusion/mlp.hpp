#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dpsr/core.hpp"
#include "dpsr/numerics/rng.hpp"

namespace dpsr {

struct MlpShape {
  Index in_dim = 0;
  Index out_dim = 0;
  Index hidden = 256;
  Index blocks = 2;
  Index emb_dim = 64;  // 0 disables the time embedding

  bool operator==(const MlpShape&) const = default;
};

// Sinusoidal embedding of t in [0, 1]; rows are [sin; cos] over geometric
// frequencies, one column per time value.
inline Mat time_embedding(const Vec& t, Index dim) {
  Mat emb(dim, t.size());
  if (dim == 0) return emb;
  require(dim % 2 == 0, "time embedding dimension must be even");
  const Index half = dim / 2;
  for (Index k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
    for (Index i = 0; i < t.size(); ++i) {
      const double arg = 1000.0 * t[i] * freq;
      emb(k, i) = std::sin(arg);
      emb(half + k, i) = std::cos(arg);
    }
  }
  return emb;
}

inline Mat silu(const Mat& x) { return x.array() / (1.0 + (-x.array()).exp()); }

inline Mat silu_grad(const Mat& x) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
  return (s * (1.0 + x.array() * (1.0 - s))).matrix();
}

// Activations recorded by a forward pass, replayed by backward().
struct MlpTape {
  Mat input;                // [x; emb]
  std::vector<Mat> h;       // residual stream before each block and after the last
  std::vector<Mat> sig_h;   // sigmoid(h)
  std::vector<Mat> act_h;   // silu(h)
  std::vector<Mat> pre;     // inner pre-activation per block
  std::vector<Mat> sig_u;   // sigmoid(pre)
  std::vector<Mat> act_u;   // silu(pre)
  Mat features;             // silu(h.back()), the input of the output layer
};

namespace detail {
inline void sigmoid_silu(const Mat& x, Mat& sig, Mat& act) {
  sig = (1.0 / (1.0 + (-x.array()).exp())).matrix();
  act = x.cwiseProduct(sig);
}
// silu'(x) = s (1 + x (1 - s))
inline Mat silu_grad_from(const Mat& x, const Mat& sig) {
  return (sig.array() * (1.0 + x.array() * (1.0 - sig.array()))).matrix();
}
}  // namespace detail

// Fully connected residual network:
//   h0 = W_in [x; emb(t)] + b_in
//   h  <- h + W2 silu(W1 silu(h) + b1) + b2      (per block)
//   y  = W_out silu(h) + b_out                   (W_out, b_out start at zero)
class ResidualMlp {
 public:
  ResidualMlp() = default;
  explicit ResidualMlp(const MlpShape& shape) : shape_(shape), params_(Vec::Zero(param_count(shape))) {
    require(shape.in_dim >= 1 && shape.out_dim >= 1 && shape.hidden >= 1 && shape.blocks >= 0,
            "mlp: invalid shape");
    require(shape.emb_dim % 2 == 0, "mlp: time embedding dimension must be even");
  }
  ResidualMlp(const MlpShape& shape, Rng& rng) : ResidualMlp(shape) { initialize(rng); }

  static Index param_count(const MlpShape& s) {
    const Index h = s.hidden;
    return h * (s.in_dim + s.emb_dim) + h + s.blocks * 2 * (h * h + h) + s.out_dim * h + s.out_dim;
  }

  const MlpShape& shape() const { return shape_; }
  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  void set_params(const Vec& p) {
    require_dims(p.size(), params_.size(), "mlp parameters");
    params_ = p;
  }

  void initialize(Rng& rng) {
    params_.setZero();
    const Index h = shape_.hidden;
    auto fill = [&](Index offset, Index count, double scale) {
      for (Index i = 0; i < count; ++i) params_[offset + i] = scale * rng.normal();
    };
    const Index fan_in = shape_.in_dim + shape_.emb_dim;
    fill(off_w_in(), h * fan_in, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    for (Index b = 0; b < shape_.blocks; ++b) {
      fill(off_w1(b), h * h, 1.0 / std::sqrt(static_cast<double>(h)));
      fill(off_w2(b), h * h, 0.5 / std::sqrt(static_cast<double>(h)));
    }
  }

  Mat forward(const Mat& x, const Vec& t, MlpTape* tape = nullptr) const {
    require_dims(x.rows(), shape_.in_dim, "mlp input");
    require_dims(t.size(), x.cols(), "mlp time vector");
    const Index n = x.cols();
    Mat input(shape_.in_dim + shape_.emb_dim, n);
    input.topRows(shape_.in_dim) = x;
    if (shape_.emb_dim > 0) input.bottomRows(shape_.emb_dim) = time_embedding(t, shape_.emb_dim);

    Mat h = w_in() * input;
    h.colwise() += b_in();
    if (tape) {
      for (auto* v : {&tape->h, &tape->sig_h, &tape->act_h, &tape->pre, &tape->sig_u, &tape->act_u}) v->clear();
    }
    Mat sh, ah, su, au;
    for (Index b = 0; b < shape_.blocks; ++b) {
      detail::sigmoid_silu(h, sh, ah);
      Mat u = w1(b) * ah;
      u.colwise() += b1(b);
      detail::sigmoid_silu(u, su, au);
      Mat delta = w2(b) * au;
      delta.colwise() += b2(b);
      if (tape) {
        tape->h.push_back(h);
        tape->sig_h.push_back(std::move(sh));
        tape->act_h.push_back(std::move(ah));
        tape->pre.push_back(std::move(u));
        tape->sig_u.push_back(std::move(su));
        tape->act_u.push_back(std::move(au));
      }
      h += delta;
    }
    detail::sigmoid_silu(h, sh, ah);
    Mat y = w_out() * ah;
    y.colwise() += b_out();
    if (tape) {
      tape->h.push_back(std::move(h));
      tape->sig_h.push_back(std::move(sh));
      tape->input = std::move(input);
      tape->features = std::move(ah);
    }
    return y;
  }

  // Last hidden features silu(h_B), without the output layer.
  Mat features(const Mat& x, const Vec& t) const {
    MlpTape tape;
    forward(x, t, &tape);
    return tape.features;
  }

  // Parameter gradient of sum(dy .* y); optionally the input gradient.
  Vec backward(const MlpTape& tape, const Mat& dy, Mat* dx = nullptr) const {
    require_dims(dy.rows(), shape_.out_dim, "mlp output adjoint");
    Vec grad = Vec::Zero(params_.size());
    auto gmat = [&](Index off, Index r, Index c) { return Eigen::Map<Mat>(grad.data() + off, r, c); };
    auto gvec = [&](Index off, Index r) { return Eigen::Map<Vec>(grad.data() + off, r); };
    const Index h = shape_.hidden;

    gmat(off_w_out(), shape_.out_dim, h).noalias() = dy * tape.features.transpose();
    gvec(off_b_out(), shape_.out_dim) = dy.rowwise().sum();
    Mat dh = (w_out().transpose() * dy).cwiseProduct(detail::silu_grad_from(tape.h.back(), tape.sig_h.back()));

    for (Index b = shape_.blocks - 1; b >= 0; --b) {
      const auto bu = static_cast<std::size_t>(b);
      gmat(off_w2(b), h, h).noalias() = dh * tape.act_u[bu].transpose();
      gvec(off_b2(b), h) = dh.rowwise().sum();
      const Mat du = (w2(b).transpose() * dh).cwiseProduct(detail::silu_grad_from(tape.pre[bu], tape.sig_u[bu]));
      gmat(off_w1(b), h, h).noalias() = du * tape.act_h[bu].transpose();
      gvec(off_b1(b), h) = du.rowwise().sum();
      dh += (w1(b).transpose() * du).cwiseProduct(detail::silu_grad_from(tape.h[bu], tape.sig_h[bu]));
    }
    gmat(off_w_in(), h, shape_.in_dim + shape_.emb_dim).noalias() = dh * tape.input.transpose();
    gvec(off_b_in(), h) = dh.rowwise().sum();
    if (dx) *dx = (w_in().transpose() * dh).topRows(shape_.in_dim);
    return grad;
  }

 private:
  Index off_w_in() const { return 0; }
  Index off_b_in() const { return shape_.hidden * (shape_.in_dim + shape_.emb_dim); }
  Index off_block(Index b) const { return off_b_in() + shape_.hidden + b * 2 * (shape_.hidden * shape_.hidden + shape_.hidden); }
  Index off_w1(Index b) const { return off_block(b); }
  Index off_b1(Index b) const { return off_w1(b) + shape_.hidden * shape_.hidden; }
  Index off_w2(Index b) const { return off_b1(b) + shape_.hidden; }
  Index off_b2(Index b) const { return off_w2(b) + shape_.hidden * shape_.hidden; }
  Index off_w_out() const { return off_block(shape_.blocks); }
  Index off_b_out() const { return off_w_out() + shape_.out_dim * shape_.hidden; }

  using CMap = Eigen::Map<const Mat>;
  using CVMap = Eigen::Map<const Vec>;
  CMap w_in() const { return CMap(params_.data() + off_w_in(), shape_.hidden, shape_.in_dim + shape_.emb_dim); }
  CVMap b_in() const { return CVMap(params_.data() + off_b_in(), shape_.hidden); }
  CMap w1(Index b) const { return CMap(params_.data() + off_w1(b), shape_.hidden, shape_.hidden); }
  CVMap b1(Index b) const { return CVMap(params_.data() + off_b1(b), shape_.hidden); }
  CMap w2(Index b) const { return CMap(params_.data() + off_w2(b), shape_.hidden, shape_.hidden); }
  CVMap b2(Index b) const { return CVMap(params_.data() + off_b2(b), shape_.hidden); }
  CMap w_out() const { return CMap(params_.data() + off_w_out(), shape_.out_dim, shape_.hidden); }
  CVMap b_out() const { return CVMap(params_.data() + off_b_out(), shape_.out_dim); }

  MlpShape shape_;
  Vec params_;
};

}  // namespace dpsr
