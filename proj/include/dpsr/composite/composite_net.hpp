#pragma once

#include <string>
#include <vector>

#include "dpsr/composite/part_split.hpp"
#include "dpsr/diffusion/checkpoint.hpp"
#include "dpsr/diffusion/noise_net.hpp"

namespace dpsr {

enum class Variant { Base, Fused, Mixed };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Base: return "base";
    case Variant::Fused: return "fused";
    case Variant::Mixed: return "mixed";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "base") return Variant::Base;
  if (s == "fused") return Variant::Fused;
  if (s == "mixed") return Variant::Mixed;
  throw UsageError("unknown variant '" + s + "' (expected base, fused or mixed)");
}

struct FusedConfig {
  Index hidden = 256;
  Index blocks = 2;
  Index emb_dim = 64;  // 0 disables the direct time input
};

// Frozen part priors (body, one shared hand, face) plus an optional fused
// residual module over their last-layer features. Works in the whole-vector
// normalized space assembled from the part statistics; the right hand is
// routed through the hand net under the mirror map.
class CompositeNet : public NoisePredictor {
 public:
  CompositeNet(PartSplit split, NoiseNet body, NoiseNet hand, NoiseNet face, Variant variant,
               const FusedConfig& fused_cfg, Rng& rng)
      : split_(split), body_(std::move(body)), hand_(std::move(hand)), face_(std::move(face)), variant_(variant) {
    setup();
    fused_ = ResidualMlp(fused_shape(fused_cfg), rng);
  }

  CompositeNet(PartSplit split, NoiseNet body, NoiseNet hand, NoiseNet face, Variant variant,
               const FusedConfig& fused_cfg, const Vec& fused_params)
      : split_(split), body_(std::move(body)), hand_(std::move(hand)), face_(std::move(face)), variant_(variant) {
    setup();
    fused_ = ResidualMlp(fused_shape(fused_cfg));
    fused_.set_params(fused_params);
  }

  Index dim() const override { return split_.total(); }
  const NormStats& stats() const override { return stats_; }
  const Schedule& schedule() const override { return body_.schedule(); }
  using NoisePredictor::predict;

  Mat predict(const Mat& xt, const Vec& t) const override {
    Mat feats;
    Mat out = base_predict(xt, t, variant_ == Variant::Base ? nullptr : &feats);
    if (variant_ != Variant::Base) out += fused_.forward(feats, t);
    return out;
  }

  // Concatenated part predictions; optionally the stacked part features.
  Mat base_predict(const Mat& xt, const Vec& t, Mat* features = nullptr) const {
    require_dims(xt.rows(), dim(), "composite input");
    const Block b = split_[PartBlock::Body], l = split_[PartBlock::LeftHand], r = split_[PartBlock::RightHand],
                f = split_[PartBlock::Face];
    const Vec signs = split_.hand_mirror_signs();
    Mat out(dim(), xt.cols());
    MlpTape tb, tl, tr, tf;
    out.middleRows(b.begin, b.size) = body_.forward(xt.middleRows(b.begin, b.size), t, features ? &tb : nullptr);
    out.middleRows(l.begin, l.size) = hand_.forward(xt.middleRows(l.begin, l.size), t, features ? &tl : nullptr);
    const Mat rin = signs.asDiagonal() * xt.middleRows(r.begin, r.size);
    out.middleRows(r.begin, r.size) = signs.asDiagonal() * hand_.forward(rin, t, features ? &tr : nullptr);
    out.middleRows(f.begin, f.size) = face_.forward(xt.middleRows(f.begin, f.size), t, features ? &tf : nullptr);
    if (features) {
      features->resize(feature_dim(), xt.cols());
      Index o = 0;
      for (const MlpTape* tp : {&tb, &tl, &tr, &tf}) {
        features->middleRows(o, tp->features.rows()) = tp->features;
        o += tp->features.rows();
      }
    }
    return out;
  }

  Index feature_dim() const {
    return body_.config().hidden + 2 * hand_.config().hidden + face_.config().hidden;
  }

  const PartSplit& split() const { return split_; }
  Variant variant() const { return variant_; }
  void set_variant(Variant v) { variant_ = v; }
  const NoiseNet& body() const { return body_; }
  const NoiseNet& hand() const { return hand_; }
  const NoiseNet& face() const { return face_; }
  const ResidualMlp& fused() const { return fused_; }
  ResidualMlp& fused() { return fused_; }
  FusedConfig fused_config() const { return {fused_.shape().hidden, fused_.shape().blocks, fused_.shape().emb_dim}; }

 private:
  MlpShape fused_shape(const FusedConfig& c) const { return {feature_dim(), dim(), c.hidden, c.blocks, c.emb_dim}; }

  void setup() {
    split_.validate();
    require_dims(body_.dim(), split_[PartBlock::Body].size, "composite body net");
    require_dims(hand_.dim(), split_.hand_dim(), "composite hand net");
    require_dims(face_.dim(), split_[PartBlock::Face].size, "composite face net");
    const Schedule& s = body_.schedule();
    require(hand_.schedule().xi_min == s.xi_min && hand_.schedule().xi_max == s.xi_max &&
                face_.schedule().xi_min == s.xi_min && face_.schedule().xi_max == s.xi_max,
            "composite: part nets use different schedules");
    const Index d = split_.total();
    stats_ = NormStats{Vec(d), Vec(d)};
    auto put = [&](PartBlock p, const NormStats& s, const Vec& sign) {
      const Block blk = split_[p];
      stats_.mean.segment(blk.begin, blk.size) = s.mean.cwiseProduct(sign);
      stats_.std.segment(blk.begin, blk.size) = s.std;
    };
    put(PartBlock::Body, body_.stats(), Vec::Ones(body_.dim()));
    put(PartBlock::LeftHand, hand_.stats(), Vec::Ones(hand_.dim()));
    put(PartBlock::RightHand, hand_.stats(), split_.hand_mirror_signs());
    put(PartBlock::Face, face_.stats(), Vec::Ones(face_.dim()));
  }

  PartSplit split_;
  NoiseNet body_, hand_, face_;
  Variant variant_ = Variant::Base;
  ResidualMlp fused_;
  NormStats stats_;
};

// Layout after the common header: variant u32 | split JSON | fused hidden,
// blocks, emb u32 | body, hand, face checkpoint blobs | fused params | CRC.
inline std::vector<std::uint8_t> encode_composite(const CompositeNet& net) {
  ByteWriter w;
  write_checkpoint_header(w, kKindComposite);
  w.u32(static_cast<std::uint32_t>(net.variant()));
  w.str(net.split().to_json().dump());
  const FusedConfig fc = net.fused_config();
  w.u32(static_cast<std::uint32_t>(fc.hidden));
  w.u32(static_cast<std::uint32_t>(fc.blocks));
  w.u32(static_cast<std::uint32_t>(fc.emb_dim));
  w.blob(encode_checkpoint(net.body()));
  w.blob(encode_checkpoint(net.hand()));
  w.blob(encode_checkpoint(net.face()));
  w.vec(net.fused().params());
  w.append_crc();
  return w.data();
}

inline CompositeNet decode_composite(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  const auto body = check_crc(bytes);
  ByteReader r(body);
  read_checkpoint_header(r, kKindComposite);
  const std::uint32_t v = r.u32();
  if (v > 2) throw FormatError("composite: unknown variant tag");
  PartSplit split;
  try {
    split = PartSplit::from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("composite: bad split: ") + e.what());
  }
  FusedConfig fc;
  fc.hidden = r.u32();
  fc.blocks = r.u32();
  fc.emb_dim = r.u32();
  NoiseNet b = decode_checkpoint(r.blob());
  NoiseNet h = decode_checkpoint(r.blob());
  NoiseNet f = decode_checkpoint(r.blob());
  const Vec params = r.vec();
  if (r.remaining() != 0) throw FormatError("composite: trailing bytes");
  try {
    return CompositeNet(split, std::move(b), std::move(h), std::move(f), static_cast<Variant>(v), fc, params);
  } catch (const UsageError& e) {
    throw FormatError(std::string("composite: ") + e.what());
  }
}

inline void save_composite(const CompositeNet& net, const std::string& path) { write_file(path, encode_composite(net)); }
inline CompositeNet load_composite(const std::string& path) { return decode_composite(read_file(path)); }

// Reads the checkpoint kind without decoding the rest.
inline std::uint32_t checkpoint_kind(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  std::uint32_t kind;
  std::memcpy(&kind, bytes.data() + 8, 4);
  return kind;
}

}  // namespace dpsr
