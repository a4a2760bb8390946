#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

#include <Eigen/Dense>

namespace nlmemboot {

/// Splittable pseudo-random generator built on the SplitMix64 stream.
///
/// Every stream is identified by a 64-bit key. `split(tag)` derives a child
/// stream whose key depends only on the parent key and the tag, never on how
/// many draws the parent has produced. Keying simulation and sampling work by
/// (seed, subject id, purpose) therefore gives per-subject streams that are
/// reproducible independent of iteration order or thread schedule.
class Rng {
 public:
  explicit Rng(std::uint64_t key = 0) : key_(key), state_(mix(key)) {}

  /// Child stream; independent of the number of draws taken from *this.
  Rng split(std::uint64_t tag) const { return Rng(mix(key_ ^ mix(tag))); }

  /// Child stream keyed by a string tag (FNV-1a over the bytes).
  Rng split(std::string_view tag) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return split(h);
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return finalize(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0, without modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  /// Standard normal draw, Marsaglia polar method with one cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static std::uint64_t mix(std::uint64_t z) {
    return finalize(z + 0x9e3779b97f4a7c15ull);
  }

  std::uint64_t key_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nlmemboot
