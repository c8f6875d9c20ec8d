#include <gtest/gtest.h>

#include "dpsr/composite/mixed_training.hpp"
#include "dpsr/kinematics/model.hpp"
#include "support/test_helpers.hpp"

using namespace dpsr;

namespace {

NoiseNet part(Index d, std::uint64_t seed, Index hidden = 12) {
  Rng rng(seed);
  NormStats st{0.3 * gaussian_sample(rng, d), (0.5 + gaussian_sample(rng, d).array().abs()).matrix()};
  NoiseNet n(NetConfig{d, hidden, 1, 8}, st, Schedule{}, rng);
  for (Index i = 0; i < n.params().size(); ++i) n.params()[i] = 0.3 * rng.normal();
  return n;
}

CompositeNet make(Variant v, std::uint64_t seed = 1, FusedConfig fc = {16, 1, 8}) {
  const PartSplit s = testkit::tiny_split();
  Rng rng(seed);
  return CompositeNet(s, part(1, seed + 1), part(3, seed + 2), part(1, seed + 3), v, fc, rng);
}

void scramble(ResidualMlp& m, std::uint64_t seed) {
  Rng rng(seed);
  for (Index i = 0; i < m.params().size(); ++i) m.params()[i] = 0.2 * rng.normal();
}

MixtureSampler whole_sampler(const PartSplit& s, Index n, double event_prob, std::uint64_t seed) {
  Rng rng(seed);
  return build_mixture_schedule(s, {{SourceTag::Whole, 1.0, gaussian_matrix(rng, s.total(), n)}}, {event_prob, 1.0 / 3.0});
}

}  // namespace

TEST(Composite, BaseBlocksEqualPartNets) {
  const CompositeNet net = make(Variant::Base);
  Rng rng(2);
  const Mat x = gaussian_matrix(rng, 8, 5);
  const Vec t = Vec::LinSpaced(5, 0.1, 0.9);
  const Mat y = net.predict(x, t);
  const PartSplit& s = net.split();
  EXPECT_EQ((y.topRows(1) - net.body().predict(x.topRows(1), t)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((y.middleRows(1, 3) - net.hand().predict(x.middleRows(1, 3), t)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((y.bottomRows(1) - net.face().predict(x.bottomRows(1), t)).cwiseAbs().maxCoeff(), 0.0);
  const Vec sg = s.hand_mirror_signs();
  const Mat rh = sg.asDiagonal() * net.hand().predict(sg.asDiagonal() * x.middleRows(4, 3), t);
  EXPECT_EQ((y.middleRows(4, 3) - rh).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Composite, ZeroInitFusedEqualsBase) {
  CompositeNet net = make(Variant::Fused);
  Rng rng(3);
  const Mat x = gaussian_matrix(rng, 8, 4);
  const Vec t = Vec::Constant(4, 0.3);
  EXPECT_EQ(net.predict(x, t), net.base_predict(x, t));
  scramble(net.fused(), 4);
  EXPECT_GT((net.predict(x, t) - net.base_predict(x, t)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Composite, MirroredHandsGiveMirroredPredictions) {
  const CompositeNet net = make(Variant::Base);
  Rng rng(5);
  const Vec sg = net.split().hand_mirror_signs();
  Mat x = gaussian_matrix(rng, 8, 3);
  x.middleRows(4, 3) = sg.asDiagonal() * x.middleRows(1, 3);
  const Mat y = net.predict(x, Vec::Constant(3, 0.5));
  EXPECT_LT((y.middleRows(4, 3) - sg.asDiagonal() * y.middleRows(1, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Composite, StatsAssembledFromParts) {
  const CompositeNet net = make(Variant::Base);
  const Vec sg = net.split().hand_mirror_signs();
  EXPECT_EQ(net.stats().mean.segment(1, 3), net.hand().stats().mean);
  EXPECT_EQ(net.stats().mean.segment(4, 3), sg.cwiseProduct(net.hand().stats().mean));
  EXPECT_EQ(net.stats().std.segment(4, 3), net.hand().stats().std);
  EXPECT_THROW(make(Variant::Base).predict(Mat::Zero(7, 1), 0.5), UsageError);
}

TEST(Sampler, ProportionsMatchWeights) {
  const PartSplit s = testkit::tiny_split();
  Rng rng(6);
  std::vector<MixedSource> src;
  const SourceTag tags[5] = {SourceTag::Whole, SourceTag::BodyOnly, SourceTag::OneHand, SourceTag::TwoHand,
                             SourceTag::FaceOnly};
  for (int k = 0; k < 5; ++k) src.push_back({tags[k], kDefaultSourceWeights[static_cast<std::size_t>(k)], gaussian_matrix(rng, 8, 50)});
  const auto sampler = build_mixture_schedule(s, src);
  std::array<int, 5> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(sampler.draw(rng).source)]++;
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(counts[static_cast<std::size_t>(k)] / double(n), kDefaultSourceWeights[static_cast<std::size_t>(k)], 0.01);
}

TEST(Sampler, SingleAndZeroWeightSources) {
  const PartSplit s = testkit::tiny_split();
  Rng rng(7);
  const auto only_face = build_mixture_schedule(
      s, {{SourceTag::FaceOnly, 1.0, gaussian_matrix(rng, 8, 10)}, {SourceTag::BodyOnly, 0.0, gaussian_matrix(rng, 8, 10)}});
  for (int i = 0; i < 1000; ++i) {
    const auto it = only_face.draw(rng);
    ASSERT_EQ(it.source, SourceTag::FaceOnly);
    EXPECT_EQ(it.x0.head(7).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(it.loss_mask[3]);
    EXPECT_FALSE(it.loss_mask[0]);
  }
  EXPECT_THROW(build_mixture_schedule(s, {{SourceTag::Whole, 0.9, gaussian_matrix(rng, 8, 10)}}), UsageError);
}

TEST(Sampler, MaskingEventRate) {
  const PartSplit s = testkit::tiny_split();
  const auto sampler = whole_sampler(s, 100, 0.2, 8);
  Rng rng(9);
  int events = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto it = sampler.draw(rng);
    events += it.masking_event ? 1 : 0;
    EXPECT_TRUE(it.available[0]);  // body is never masked
    for (bool b : it.loss_mask) EXPECT_TRUE(b);
    if (!it.available[1]) EXPECT_EQ(it.x0.segment(1, 3).cwiseAbs().maxCoeff(), 0.0);
    if (!it.available[1]) EXPECT_GT(it.target.segment(1, 3).cwiseAbs().maxCoeff(), 0.0);
    if (!it.masking_event) EXPECT_EQ(it.x0, it.target);
  }
  EXPECT_NEAR(events / double(n), 0.2, 0.015);
}

TEST(MixedTraining, RetargetImpliesCleanTarget) {
  Rng rng(21);
  const Schedule sched;
  const Mat x0 = gaussian_matrix(rng, 5, 4);
  Mat target = x0;
  target.block(2, 0, 3, 4) = gaussian_matrix(rng, 3, 4);
  DsmDraw d = draw_dsm(sched, x0, 0.1, 0.9, rng);
  const Mat eps0 = d.eps;
  retarget_noise(sched, x0, target, d);
  for (Index i = 0; i < 4; ++i) {
    const double a = sched.alpha(d.t(i)), sg = sched.sigma(d.t(i));
    EXPECT_LT(((d.xt.col(i) - sg * d.eps.col(i)) / a - target.col(i)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(d.eps.col(i).head(2), eps0.col(i).head(2));
  }
}

TEST(MixedTraining, BodyOnlyLossIgnoresOtherBlocks) {
  CompositeNet net = make(Variant::Mixed, 10);
  scramble(net.fused(), 11);
  Rng rng(12);
  const auto sampler = build_mixture_schedule(net.split(), {{SourceTag::BodyOnly, 1.0, gaussian_matrix(rng, 8, 20)}});
  Mat x0, mask;
  stack_batch(net, sampler.draw_batch(6, rng), x0, mask);
  const DsmDraw d = draw_dsm(net.schedule(), x0, 1e-3, 1.0, rng);
  Vec g;
  const double loss = mixed_loss_and_grad(net, d, mask, &g);
  // the same loss computed by hand on the body block only
  const Mat pred = net.predict(d.xt, d.t);
  double want = 0.0;
  for (Index i = 0; i < 6; ++i) want += d.weight[i] * std::pow(pred(0, i) - d.eps(0, i), 2);
  EXPECT_NEAR(loss, want / 6.0, 1e-12);
  // changing the hand/face targets does not change loss or gradient
  DsmDraw d2 = d;
  d2.eps.bottomRows(7).array() += 3.0;
  Vec g2;
  EXPECT_EQ(mixed_loss_and_grad(net, d2, mask, &g2), loss);
  EXPECT_EQ(g2, g);
  EXPECT_GT(g.cwiseAbs().maxCoeff(), 0.0);
  // finite differences on the fused parameters
  const Vec p0 = net.fused().params();
  auto f = [&](const Vec& p) {
    CompositeNet c = net;
    c.fused().set_params(p);
    return mixed_loss_and_grad(c, d, mask, nullptr);
  };
  EXPECT_LT(relative_error(g, finite_diff_grad(f, p0), 1e-8), 1e-5);
}

TEST(MixedTraining, PartNetsStayFrozen) {
  CompositeNet net = make(Variant::Mixed, 13);
  const Vec b0 = net.body().params(), h0 = net.hand().params(), f0 = net.face().params();
  const Vec fused0 = net.fused().params();
  const auto sampler = whole_sampler(net.split(), 200, 0.2, 14);
  TrainConfig cfg;
  cfg.iterations = 100;
  cfg.batch_size = 16;
  train_fused(net, sampler, cfg);
  EXPECT_EQ(net.body().params(), b0);
  EXPECT_EQ(net.hand().params(), h0);
  EXPECT_EQ(net.face().params(), f0);
  EXPECT_NE(net.fused().params(), fused0);
  CompositeNet base = make(Variant::Base);
  Rng rng(1);
  AdamState adam(1, AdamConfig{});
  EXPECT_THROW(mixed_train_step(base, sampler.draw_batch(2, rng), cfg, rng, adam), UsageError);
  EXPECT_THROW(mixed_train_step(net, {}, cfg, rng, adam), UsageError);
}

TEST(PartData, HandsArePooledWithMirroring) {
  const PartSplit s = testkit::tiny_split();
  Rng rng(15);
  const Mat whole = gaussian_matrix(rng, 8, 4);
  const Mat hands = part_training_data(s, whole, PartBlock::LeftHand);
  ASSERT_EQ(hands.cols(), 8);
  EXPECT_EQ(hands.col(0), whole.col(0).segment(1, 3));
  EXPECT_EQ(hands.col(4), s.mirror_hand(whole.col(0).segment(4, 3)));
  EXPECT_EQ(part_training_data(s, whole, PartBlock::Face), whole.bottomRows(1));
}

TEST(CompositeCheckpoint, RoundTripAndCorruption) {
  CompositeNet net = make(Variant::Mixed, 16);
  scramble(net.fused(), 17);
  const auto bytes = encode_composite(net);
  EXPECT_EQ(checkpoint_kind(bytes), kKindComposite);
  const CompositeNet back = decode_composite(bytes);
  EXPECT_EQ(back.variant(), Variant::Mixed);
  EXPECT_EQ(back.fused().params(), net.fused().params());
  EXPECT_EQ(back.hand().params(), net.hand().params());
  EXPECT_EQ(encode_composite(back), bytes);
  Rng rng(18);
  const Mat x = gaussian_matrix(rng, 8, 3);
  EXPECT_EQ(back.predict(x, 0.4), net.predict(x, 0.4));
  auto bad = bytes;
  bad[bad.size() / 3] ^= 0x01;
  EXPECT_THROW(decode_composite(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);  // wrong kind
  EXPECT_EQ(variant_from_name("fused"), Variant::Fused);
  EXPECT_THROW(variant_from_name("huge"), UsageError);
}

TEST(Composite, DefaultModelSplit) {
  const PartSplit s = PartSplit::from_model(default_model());
  EXPECT_EQ(s[PartBlock::Body].size, 33);
  EXPECT_EQ(s.hand_dim(), 18);
  EXPECT_EQ(s[PartBlock::Face].size, 13);
  EXPECT_EQ(s.total(), 82);
}
