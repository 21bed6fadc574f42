#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tapfm {

// Deterministic splitmix64-based stream generator. Identical (seed, stream)
// gives the identical sequence on every platform; std::uniform_* distributions
// are implementation-defined, so draws are produced by hand.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream)
      : state_(mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ mix(stream + 0xbf58476d1ce4e5b9ULL))),
        has_spare_(false),
        spare_(0.0) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform integer in [0, n)
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // stable derivation of a per-item stream id from a parent seed
  static uint64_t derive_stream(uint64_t base, uint64_t index) {
    return mix(mix(base + 0x9e3779b97f4a7c15ULL) ^ (index + 0x94d049bb133111ebULL));
  }

 private:
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  uint64_t state_;
  bool has_spare_;
  double spare_;
};

}  // namespace tapfm
