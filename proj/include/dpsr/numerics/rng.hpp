#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "dpsr/core.hpp"

namespace dpsr {

// Counter-based generator: the i-th draw is a pure function of (key, i), so
// streams can be split per worker or hypothesis without coordination.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  std::uint64_t seed_key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() { return mix(key_ + mix(counter_++ + 0x9e3779b97f4a7c15ULL)); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  // Index drawn proportionally to non-negative weights.
  template <class Weights>
  Index categorical(const Weights& w) {
    double total = 0.0;
    for (Index i = 0; i < static_cast<Index>(w.size()); ++i) total += w[i];
    double u = uniform() * total;
    Index last = 0;
    for (Index i = 0; i < static_cast<Index>(w.size()); ++i) {
      if (w[i] <= 0.0) continue;
      last = i;
      if (u < w[i]) return i;
      u -= w[i];
    }
    return last;
  }

  // Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
    return child;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline Vec gaussian_sample(Rng& rng, Index n) {
  require(n >= 1, "gaussian_sample: n must be >= 1");
  Vec out(n);
  for (Index i = 0; i < n; ++i) out[i] = rng.normal();
  return out;
}

inline Mat gaussian_matrix(Rng& rng, Index rows, Index cols) {
  require(rows >= 1 && cols >= 1, "gaussian_matrix: empty shape");
  Mat out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = rng.normal();
  return out;
}

}  // namespace dpsr
