#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace attnlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood 2014)
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based random stream: position is explicit state, so substreams
// derived by index are pure functions of (key, index) and never collide
// with the parent sequence. All consumers get bit-stable values for a
// fixed seed regardless of what other streams draw.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(key_ + counter_);
  }

  // uniform in (0, 1]; never 0 so log() is safe
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller; implemented here instead of std::normal_distribution so the
  // stream of values does not depend on the standard library version
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  Vec normal_vec(Eigen::Index n) {
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
    return out;
  }

  Vec unit_vec(Eigen::Index n) {
    for (;;) {
      Vec g = normal_vec(n);
      const double nrm = g.norm();
      if (nrm > 1e-12) return g / nrm;
    }
  }

  // independent derived stream; deterministic in (this stream's key, index)
  RngStream substream(std::uint64_t index) const {
    return RngStream(detail::mix64(key_ + 0xD1B54A32D192ED03ULL * (index + 1)));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Root seed split into named streams (pretrain-data, downstream-data,
// v-star, eval, ...) so adding one consumer never perturbs another.
class RootRng {
 public:
  explicit RootRng(std::uint64_t seed) : seed_(seed) {}

  RngStream stream(std::string_view name) const {
    return RngStream(detail::mix64(detail::mix64(seed_) ^ detail::fnv1a(name)));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace attnlab
