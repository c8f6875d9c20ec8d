#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "dpsr/composite/composite_net.hpp"
#include "dpsr/diffusion/train.hpp"

namespace dpsr {

enum class SourceTag { Whole, BodyOnly, OneHand, TwoHand, FaceOnly };

inline const char* source_name(SourceTag s) {
  switch (s) {
    case SourceTag::Whole: return "whole";
    case SourceTag::BodyOnly: return "body-only";
    case SourceTag::OneHand: return "one-hand";
    case SourceTag::TwoHand: return "two-hand";
    case SourceTag::FaceOnly: return "face-only";
  }
  return "?";
}

using BlockFlags = std::array<bool, 4>;  // indexed by PartBlock

struct MixedBatchItem {
  Vec x0;      // network input: normalized whole vector, unavailable or masked blocks zero
  Vec target;  // clean vector the loss points at; masked blocks keep their true values
  BlockFlags available{};
  BlockFlags loss_mask{};
  SourceTag source = SourceTag::Whole;
  bool masking_event = false;
};

// One dataset of whole vectors (normalized) that exposes only some blocks.
struct MixedSource {
  SourceTag tag = SourceTag::Whole;
  double weight = 1.0;
  Mat data;
};

struct MixedMaskingConfig {
  double event_prob = 0.2;      // whole items: chance of random part masking
  double part_prob = 1.0 / 3.0;  // per hand / face once the event fires
};

class MixtureSampler {
 public:
  MixtureSampler(PartSplit split, std::vector<MixedSource> sources, MixedMaskingConfig masking)
      : split_(split), sources_(std::move(sources)), masking_(masking) {
    require(!sources_.empty(), "mixture schedule: no sources");
    double total = 0.0;
    weights_.resize(static_cast<Index>(sources_.size()));
    for (std::size_t k = 0; k < sources_.size(); ++k) {
      const auto& s = sources_[k];
      require(s.weight >= 0.0, "mixture schedule: negative weight");
      require(s.weight == 0.0 || s.data.cols() >= 1, "mixture schedule: empty source with positive weight");
      require(s.data.cols() == 0 || s.data.rows() == split_.total(), "mixture schedule: source dimension mismatch");
      weights_[static_cast<Index>(k)] = s.weight;
      total += s.weight;
    }
    require(std::abs(total - 1.0) < 1e-9, "mixture schedule: weights must sum to 1");
    require(masking_.event_prob >= 0.0 && masking_.event_prob <= 1.0 && masking_.part_prob >= 0.0 &&
                masking_.part_prob <= 1.0,
            "mixture schedule: masking probabilities must lie in [0, 1]");
  }

  MixedBatchItem draw(Rng& rng) const {
    const auto& src = sources_[static_cast<std::size_t>(rng.categorical(weights_))];
    MixedBatchItem it;
    it.source = src.tag;
    it.x0 = src.data.col(static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(src.data.cols())));
    auto flag = [](BlockFlags& f, PartBlock p) { f[static_cast<std::size_t>(p)] = true; };
    switch (src.tag) {
      case SourceTag::Whole: it.available = {true, true, true, true}; break;
      case SourceTag::BodyOnly: flag(it.available, PartBlock::Body); break;
      case SourceTag::OneHand:
        flag(it.available, rng.uniform() < 0.5 ? PartBlock::LeftHand : PartBlock::RightHand);
        break;
      case SourceTag::TwoHand:
        flag(it.available, PartBlock::LeftHand);
        flag(it.available, PartBlock::RightHand);
        break;
      case SourceTag::FaceOnly: flag(it.available, PartBlock::Face); break;
    }
    it.loss_mask = it.available;
    if (src.tag == SourceTag::Whole && rng.uniform() < masking_.event_prob) {
      it.masking_event = true;
      for (PartBlock p : {PartBlock::LeftHand, PartBlock::RightHand, PartBlock::Face})
        if (rng.uniform() < masking_.part_prob) it.available[static_cast<std::size_t>(p)] = false;
      // loss still covers every block
    }
    for (PartBlock p : kAllBlocks)
      if (!it.loss_mask[static_cast<std::size_t>(p)]) it.x0.segment(split_[p].begin, split_[p].size).setZero();
    it.target = it.x0;
    for (PartBlock p : kAllBlocks)
      if (!it.available[static_cast<std::size_t>(p)]) it.x0.segment(split_[p].begin, split_[p].size).setZero();
    return it;
  }

  std::vector<MixedBatchItem> draw_batch(Index n, Rng& rng) const {
    std::vector<MixedBatchItem> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out.push_back(draw(rng));
    return out;
  }

  const PartSplit& split() const { return split_; }

 private:
  PartSplit split_;
  std::vector<MixedSource> sources_;
  MixedMaskingConfig masking_;
  Vec weights_;
};

inline MixtureSampler build_mixture_schedule(const PartSplit& split, std::vector<MixedSource> sources,
                                             MixedMaskingConfig masking = {}) {
  return MixtureSampler(split, std::move(sources), masking);
}

// Default source proportions: whole, body-only, one-hand, two-hand, face-only.
inline constexpr std::array<double, 5> kDefaultSourceWeights{0.65, 0.14, 0.12, 0.04, 0.05};

// Whole-vector inputs, clean targets and per-entry loss masks of a batch.
inline void stack_batch(const CompositeNet& net, const std::vector<MixedBatchItem>& batch, Mat& x0, Mat& target,
                        Mat& mask) {
  const Index d = net.dim(), n = static_cast<Index>(batch.size());
  x0.resize(d, n);
  target.resize(d, n);
  mask = Mat::Zero(d, n);
  for (Index i = 0; i < n; ++i) {
    const auto& it = batch[static_cast<std::size_t>(i)];
    require_dims(it.x0.size(), d, "mixed batch item");
    x0.col(i) = it.x0;
    target.col(i) = it.target.size() == 0 ? it.x0 : it.target;
    require_dims(target.col(i).size(), d, "mixed batch target");
    for (PartBlock p : kAllBlocks)
      if (it.loss_mask[static_cast<std::size_t>(p)])
        mask.col(i).segment(net.split()[p].begin, net.split()[p].size).setOnes();
  }
}

inline void stack_batch(const CompositeNet& net, const std::vector<MixedBatchItem>& batch, Mat& x0, Mat& mask) {
  Mat target;
  stack_batch(net, batch, x0, target, mask);
}

// Noise target whose implied clean vector is `target` given the noised input:
// (x_t - alpha_t target) / sigma_t. Equals the drawn noise where input and target agree.
inline void retarget_noise(const Schedule& s, const Mat& x0, const Mat& target, DsmDraw& draw) {
  for (Index i = 0; i < draw.eps.cols(); ++i) {
    const double a = s.alpha(draw.t(i)), sg = s.sigma(draw.t(i));
    draw.eps.col(i) += (a / sg) * (x0.col(i) - target.col(i));
  }
}

// mean_i w(t_i) || mask_i .* (eps_i - pred_i) ||^2 and its gradient with
// respect to the fused parameters.
inline double mixed_loss_and_grad(const CompositeNet& net, const DsmDraw& draw, const Mat& mask, Vec* grad) {
  const auto n = static_cast<double>(draw.eps.cols());
  Mat feats;
  const Mat base = net.base_predict(draw.xt, draw.t, &feats);
  MlpTape tape;
  const Mat pred = base + net.fused().forward(feats, draw.t, grad ? &tape : nullptr);
  const Mat resid = (pred - draw.eps).cwiseProduct(mask);
  if (grad) *grad = net.fused().backward(tape, (2.0 / n) * resid * draw.weight.asDiagonal());
  return (resid.colwise().squaredNorm().transpose().cwiseProduct(draw.weight)).sum() / n;
}

// Masked DSM step on the fused module only; part nets stay frozen.
inline double mixed_train_step(CompositeNet& net, const std::vector<MixedBatchItem>& batch, const TrainConfig& cfg,
                               Rng& rng, AdamState& adam, Index iteration = 0) {
  require(!batch.empty(), "mixed_train_step: empty batch");
  require(net.variant() != Variant::Base, "mixed_train_step: base variant has no trainable parameters");
  Mat x0, target, mask;
  stack_batch(net, batch, x0, target, mask);
  DsmDraw draw = draw_dsm(net.schedule(), x0, cfg.t_lo, cfg.t_hi, rng);
  retarget_noise(net.schedule(), x0, target, draw);
  Vec grad;
  const double loss = mixed_loss_and_grad(net, draw, mask, &grad);
  if (!std::isfinite(loss) || !grad.allFinite()) {
    throw NumericError("mixed_train_step: non-finite loss at iteration " + std::to_string(iteration) + ", " +
                       describe_times(draw.t));
  }
  adam.config.lr = cfg.lr_at(iteration);
  adam_update(net.fused().params(), grad, adam);
  return loss;
}

inline std::vector<double> train_fused(CompositeNet& net, const MixtureSampler& sampler, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  AdamState adam(net.fused().params().size(), AdamConfig{cfg.lr});
  std::vector<double> losses;
  for (Index it = 0; it < cfg.iterations; ++it)
    losses.push_back(mixed_train_step(net, sampler.draw_batch(cfg.batch_size, rng), cfg, rng, adam, it));
  return losses;
}

// Raw training matrix of one part net. The hand net sees left hands and
// mirrored right hands.
inline Mat part_training_data(const PartSplit& split, const Mat& whole, PartBlock part) {
  require_dims(whole.rows(), split.total(), "part_training_data");
  if (part == PartBlock::Body || part == PartBlock::Face) return whole.middleRows(split[part].begin, split[part].size);
  const Block l = split[PartBlock::LeftHand], r = split[PartBlock::RightHand];
  Mat out(split.hand_dim(), 2 * whole.cols());
  out.leftCols(whole.cols()) = whole.middleRows(l.begin, l.size);
  out.rightCols(whole.cols()) = split.hand_mirror_signs().asDiagonal() * whole.middleRows(r.begin, r.size);
  return out;
}

}  // namespace dpsr
