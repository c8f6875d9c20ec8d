#pragma once

#include <cstring>
#include <string>

#include "dpsr/core.hpp"
#include "dpsr/io/binary.hpp"
#include "dpsr/synthdata/mixture.hpp"
#include "dpsr/synthdata/normalize.hpp"
#include "json.hpp"

namespace dpsr {

// Raw-space samples (columns) with the train-split statistics attached.
struct Dataset {
  Mat samples;
  std::string split = "train";
  std::string spec_hash;
  NormStats stats;

  Index dim() const { return samples.rows(); }
  Index count() const { return samples.cols(); }
  Mat normalized() const { return normalize(samples, stats); }
};

inline std::uint64_t split_stream(const std::string& split) {
  if (split == "train") return 1;
  if (split == "val") return 2;
  if (split == "test") return 3;
  throw UsageError("unknown split '" + split + "'");
}

// Sample i is drawn from its own stream split(seed, split).split(i).
inline Mat generate_samples(const MixtureSpec& spec, Index n, std::uint64_t seed, const std::string& split) {
  spec.validate();
  require(n >= 1, "generate_samples: n must be >= 1");
  const Rng base = Rng(seed).split(split_stream(split));
  Mat out(spec.dim(), n);
  for (Index i = 0; i < n; ++i) {
    Rng r = base.split(static_cast<std::uint64_t>(i));
    out.col(i) = sample_gt_pose(spec, r);
  }
  return out;
}

struct DatasetSplits {
  Dataset train, val, test;
};

inline DatasetSplits generate_splits(const MixtureSpec& spec, Index n_train, Index n_val, Index n_test,
                                     std::uint64_t seed) {
  DatasetSplits s;
  const std::string hash = spec.hash();
  s.train = {generate_samples(spec, n_train, seed, "train"), "train", hash, {}};
  s.train.stats = compute_stats(s.train.samples);
  if (n_val > 0) s.val = {generate_samples(spec, n_val, seed, "val"), "val", hash, s.train.stats};
  if (n_test > 0) s.test = {generate_samples(spec, n_test, seed, "test"), "test", hash, s.train.stats};
  return s;
}

// .dpsd layout: "DPSD" | u64 header length | JSON header | count x dim
// row-major little-endian f64 block.
inline std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  nlohmann::json h;
  h["format_version"] = 1;
  h["spec_hash"] = ds.spec_hash;
  h["split"] = ds.split;
  h["dim"] = ds.dim();
  h["count"] = ds.count();
  h["stats"] = {{"mean", std::vector<double>(ds.stats.mean.data(), ds.stats.mean.data() + ds.stats.mean.size())},
                {"std", std::vector<double>(ds.stats.std.data(), ds.stats.std.data() + ds.stats.std.size())}};
  const std::string header = h.dump();
  ByteWriter w;
  w.bytes("DPSD", 4);
  w.u64(header.size());
  w.bytes(header.data(), header.size());
  // Column-major d x N storage is exactly the row-major N x d block.
  w.bytes(ds.samples.data(), static_cast<std::size_t>(ds.samples.size()) * 8);
  return w.data();
}

inline Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "DPSD", 4) != 0) throw FormatError("dataset: bad magic");
  const auto hlen = r.u64();
  if (hlen > r.remaining()) throw FormatError("dataset: header length exceeds file");
  std::string header(hlen, '\0');
  r.bytes(header.data(), hlen);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset: bad header: ") + e.what());
  }
  Dataset ds;
  ds.split = h.at("split").get<std::string>();
  ds.spec_hash = h.at("spec_hash").get<std::string>();
  const auto d = h.at("dim").get<Index>();
  const auto n = h.at("count").get<Index>();
  const auto mean = h.at("stats").at("mean").get<std::vector<double>>();
  const auto sd = h.at("stats").at("std").get<std::vector<double>>();
  ds.stats.mean = Eigen::Map<const Vec>(mean.data(), static_cast<Index>(mean.size()));
  ds.stats.std = Eigen::Map<const Vec>(sd.data(), static_cast<Index>(sd.size()));
  if (r.remaining() != static_cast<std::size_t>(d * n) * 8) throw FormatError("dataset: data block size mismatch");
  ds.samples.resize(d, n);
  r.bytes(ds.samples.data(), static_cast<std::size_t>(d * n) * 8);
  if (ds.stats.dim() != d) throw FormatError("dataset: stats dimension mismatch");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) { write_file(path, encode_dataset(ds)); }
inline Dataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

}  // namespace dpsr
