#pragma once

#include <cmath>
#include <cstdint>

#include "muxloop/types.hpp"

namespace muxloop {

// Counter-based generator: all randomness of a cycle derives from
// (seed, stream), so shards can be replayed and merged in any order.
// The stream is a splitmix64 walk from a mixed key.
class CycleRng {
 public:
  CycleRng(std::uint64_t seed, std::uint64_t stream) {
    state_ = mix(mix(seed) ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Pair number per pulse by CDF inversion; exact for both laws.
  int sample_pairs(const PhotonStatistics& stats) {
    if (stats.mu <= 0.0) return 0;
    const double u = uniform();
    if (stats.law == PhotonLaw::Thermal) {
      const double ratio = stats.mu / (1.0 + stats.mu);
      double pn = 1.0 - ratio;  // p(0) = 1 / (1 + mu)
      double cdf = pn;
      int n = 0;
      while (u >= cdf && n < kMaxDraw) {
        pn *= ratio;
        cdf += pn;
        ++n;
      }
      return n;
    }
    double pn = std::exp(-stats.mu);
    double cdf = pn;
    int n = 0;
    while (u >= cdf && n < kMaxDraw) {
      pn *= stats.mu / static_cast<double>(n + 1);
      cdf += pn;
      ++n;
    }
    return n;
  }

  int binomial(int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (bernoulli(p)) ++k;
    }
    return k;
  }

  // Exponential inter-arrival gap, seconds, for rate in Hz.
  double exponential(double rate_hz) {
    const double u = uniform();          // in [0, 1)
    return -std::log1p(-u) / rate_hz;    // 1 - u in (0, 1]
  }

 private:
  static constexpr int kMaxDraw = 4096;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace muxloop
