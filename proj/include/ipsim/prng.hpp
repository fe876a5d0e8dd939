#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

// Counter-based random streams (Philox 4x64-10, Salmon et al., SC'11).
// Each (seed, stream_id) pair addresses an independent stream, so replicas
// can be generated in any order, on any number of threads, with bit-identical
// results. Output matches NumPy's Philox bit generator word for word.

namespace ipsim {

namespace detail {

inline void mulhilo64(uint64_t a, uint64_t b, uint64_t& hi, uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<uint64_t>(p >> 64);
  lo = static_cast<uint64_t>(p);
}

inline void philox4x64_round(std::array<uint64_t, 4>& ctr, const std::array<uint64_t, 2>& key) {
  constexpr uint64_t M0 = 0xD2E7470EE14C6C93ULL;
  constexpr uint64_t M1 = 0xCA5A826395121157ULL;
  uint64_t hi0, lo0, hi1, lo1;
  mulhilo64(M0, ctr[0], hi0, lo0);
  mulhilo64(M1, ctr[2], hi1, lo1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline std::array<uint64_t, 4> philox4x64_10(std::array<uint64_t, 4> ctr,
                                             std::array<uint64_t, 2> key) {
  constexpr uint64_t W0 = 0x9E3779B97F4A7C15ULL;
  constexpr uint64_t W1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    philox4x64_round(ctr, key);
    if (round < 9) {
      key[0] += W0;
      key[1] += W1;
    }
  }
  return ctr;
}

}  // namespace detail

/// One independent random stream. Cheap to construct; no shared state.
class RandomStream {
 public:
  RandomStream(uint64_t seed, uint64_t stream_id) : key_{seed, stream_id} {}

  static constexpr std::string_view algorithm() { return "philox4x64-10"; }

  uint64_t next_u64() {
    if (have_ == 0) {
      buf_ = detail::philox4x64_10({block_, 0, 0, 0}, key_);
      ++block_;
      have_ = 4;
    }
    return buf_[4 - have_--];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate (rate > 0).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Standard normal (Box-Muller; second variate cached).
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return cached_normal_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(theta);
    have_normal_ = true;
    return r * std::cos(theta);
  }

 private:
  std::array<uint64_t, 2> key_;
  uint64_t block_ = 0;
  std::array<uint64_t, 4> buf_{};
  int have_ = 0;
  bool have_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace ipsim
