#pragma once

#include <array>
#include <string>

#include "dpsr/core.hpp"
#include "dpsr/kinematics/model.hpp"
#include "json.hpp"

namespace dpsr {

struct Block {
  Index begin = 0;
  Index size = 0;
  Index end() const { return begin + size; }
  bool operator==(const Block&) const = default;
};

enum class PartBlock { Body = 0, LeftHand = 1, RightHand = 2, Face = 3 };
inline constexpr std::array<PartBlock, 4> kAllBlocks{PartBlock::Body, PartBlock::LeftHand, PartBlock::RightHand,
                                                     PartBlock::Face};

// Index ranges of the whole pose vector per part. The face block holds the
// face joint angles followed by the expression coefficients.
struct PartSplit {
  std::array<Block, 4> blocks;

  const Block& operator[](PartBlock p) const { return blocks[static_cast<std::size_t>(p)]; }
  Index total() const { return blocks[3].end(); }
  Index hand_dim() const { return (*this)[PartBlock::LeftHand].size; }
  bool operator==(const PartSplit&) const = default;

  void validate() const {
    Index cursor = 0;
    for (const auto& b : blocks) {
      require(b.begin == cursor && b.size >= 1, "part split: blocks must be contiguous, ordered and nonempty");
      cursor = b.end();
    }
    require(hand_dim() == (*this)[PartBlock::RightHand].size, "part split: hand blocks differ in size");
    require(hand_dim() % 3 == 0, "part split: hand block must hold axis-angle triples");
  }

  // Per-entry sign of the left/right mirror map (x, y, z) -> (x, -y, -z)
  // for axis-angle under reflection through the x = 0 plane.
  Vec hand_mirror_signs() const {
    Vec s(hand_dim());
    for (Index i = 0; i < s.size(); ++i) s[i] = (i % 3 == 0) ? 1.0 : -1.0;
    return s;
  }

  Vec mirror_hand(const Vec& hand) const {
    require_dims(hand.size(), hand_dim(), "mirror_hand");
    return hand.cwiseProduct(hand_mirror_signs());
  }

  static PartSplit from_model(const ArticulatedModel& model) {
    PartSplit s;
    Index cursor = 0;
    const Part order[4] = {Part::Body, Part::LeftHand, Part::RightHand, Part::Face};
    for (int k = 0; k < 4; ++k) {
      const auto js = model.joints_of(order[k]);
      for (std::size_t i = 0; i < js.size(); ++i) {
        require(js[i] == js.front() + static_cast<Index>(i) && js.front() * 3 == cursor,
                "part split: joints of a part must be contiguous and ordered body, hands, face");
      }
      Index size = 3 * static_cast<Index>(js.size());
      if (order[k] == Part::Face) size += model.expression_count();
      s.blocks[static_cast<std::size_t>(k)] = {cursor, size};
      cursor += size;
    }
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json js = nlohmann::json::array();
    for (const auto& b : blocks) js.push_back({b.begin, b.size});
    return js;
  }

  static PartSplit from_json(const nlohmann::json& js) {
    PartSplit s;
    if (!js.is_array() || js.size() != 4) throw FormatError("part split: expected 4 blocks");
    for (std::size_t k = 0; k < 4; ++k) s.blocks[k] = {js[k].at(0).get<Index>(), js[k].at(1).get<Index>()};
    try {
      s.validate();
    } catch (const UsageError& e) {
      throw FormatError(e.what());
    }
    return s;
  }
};

inline const char* block_name(PartBlock p) {
  switch (p) {
    case PartBlock::Body: return "body";
    case PartBlock::LeftHand: return "left_hand";
    case PartBlock::RightHand: return "right_hand";
    case PartBlock::Face: return "face";
  }
  return "body";
}

}  // namespace dpsr
