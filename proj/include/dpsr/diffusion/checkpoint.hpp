#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "dpsr/diffusion/noise_net.hpp"
#include "dpsr/io/binary.hpp"

namespace dpsr {

// Layout (little-endian):
//   "DPSR" | u32 version | u32 kind | u32 dim | u32 hidden | u32 blocks |
//   u32 emb_dim | f64 xi_min | f64 xi_max | vec mean | vec std |
//   vec params | u32 crc32 of everything before it
// Vectors are u64 length followed by f64 entries.
inline constexpr char kCheckpointMagic[4] = {'D', 'P', 'S', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kKindNoiseNet = 1;
inline constexpr std::uint32_t kKindComposite = 2;

inline void write_checkpoint_header(ByteWriter& w, std::uint32_t kind) {
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(kind);
}

inline void read_checkpoint_header(ByteReader& r, std::uint32_t expected_kind) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("checkpoint: bad magic");
  if (r.u32() != kCheckpointVersion) throw FormatError("checkpoint: unsupported format version");
  if (r.u32() != expected_kind) throw FormatError("checkpoint: unexpected checkpoint kind");
}

inline std::vector<std::uint8_t> encode_checkpoint(const NoiseNet& net) {
  ByteWriter w;
  write_checkpoint_header(w, kKindNoiseNet);
  const auto& c = net.config();
  w.u32(static_cast<std::uint32_t>(c.dim));
  w.u32(static_cast<std::uint32_t>(c.hidden));
  w.u32(static_cast<std::uint32_t>(c.blocks));
  w.u32(static_cast<std::uint32_t>(c.emb_dim));
  w.f64(net.schedule().xi_min);
  w.f64(net.schedule().xi_max);
  w.vec(net.stats().mean);
  w.vec(net.stats().std);
  w.vec(net.params());
  w.append_crc();
  return w.data();
}

inline NoiseNet decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto body = check_crc(bytes);
  ByteReader r(body);
  read_checkpoint_header(r, kKindNoiseNet);
  NetConfig c;
  c.dim = r.u32();
  c.hidden = r.u32();
  c.blocks = r.u32();
  c.emb_dim = r.u32();
  Schedule s{r.f64(), r.f64()};
  NormStats stats{r.vec(), r.vec()};
  Vec params = r.vec();
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  if (params.size() != ResidualMlp::param_count(c.mlp_shape())) throw FormatError("checkpoint: parameter count mismatch");
  try {
    return NoiseNet(c, stats, s, params);
  } catch (const UsageError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const NoiseNet& net, const std::string& path) { write_file(path, encode_checkpoint(net)); }
inline NoiseNet load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace dpsr
