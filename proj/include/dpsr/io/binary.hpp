#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "dpsr/core.hpp"

namespace dpsr {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void vec(const Vec& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    bytes(v.data(), static_cast<std::size_t>(v.size()) * 8);
  }
  void blob(const std::vector<std::uint8_t>& b) {
    u64(b.size());
    bytes(b.data(), b.size());
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void append_crc() { u32(crc32_of(buf_.data(), buf_.size())); }
  const std::vector<std::uint8_t>& data() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& buf) : ByteReader(buf.data(), buf.size()) {}

  void bytes(void* out, std::size_t n) {
    if (n > size_ - pos_) throw FormatError("unexpected end of data");
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  Vec vec() {
    const auto n = u64();
    if (n > (size_ - pos_) / 8) throw FormatError("vector length exceeds data");
    Vec v(static_cast<Index>(n));
    bytes(v.data(), n * 8);
    return v;
  }
  std::vector<std::uint8_t> blob() {
    const auto n = u64();
    if (n > size_ - pos_) throw FormatError("blob length exceeds data");
    std::vector<std::uint8_t> b(data_ + pos_, data_ + pos_ + n);
    pos_ += n;
    return b;
  }
  std::string str() {
    const auto b = blob();
    return std::string(b.begin(), b.end());
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

// Verifies and strips the trailing CRC32 of a buffer.
inline std::vector<std::uint8_t> check_crc(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 4) throw FormatError("data too short for checksum");
  const std::size_t body = buf.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + body, 4);
  if (stored != crc32_of(buf.data(), body)) throw FormatError("checksum mismatch");
  return {buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(body)};
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("write failed for " + path);
}

inline std::string hex_crc(const std::vector<std::uint8_t>& data) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(data.data(), data.size()));
  return buf;
}

}  // namespace dpsr
