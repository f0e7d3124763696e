#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cq {

/**
 * Deterministic random source used by everything in this library.
 *
 * The raw generator is std::mt19937_64, whose output sequence is pinned by
 * the standard, so runs are reproducible across platforms and compilers.
 * The std::* distribution adaptors are implementation-defined; the
 * transforms below replace them and are part of the reproducibility
 * contract:
 *
 *   uniform01()    one raw draw; the top 53 bits mapped to [0, 1)
 *   uniform_int(n) one raw draw; floor(uniform01 * n)
 *   gaussian()     exactly two raw draws (Box-Muller); the paired second
 *                  deviate is discarded, never cached
 *
 * Consumers document their draw order next to the sampling code; given the
 * same seed the whole stream of sampled quantities is identical between
 * runs.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // One raw draw, uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // One raw draw, uniform on {0, ..., n-1}. n must be positive.
  int uniform_int(int n) {
    int k = static_cast<int>(uniform01() * static_cast<double>(n));
    return k < n ? k : n - 1;  // guard against rounding at the top edge
  }

  // Uniform on [lo, hi). One raw draw.
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal deviate. Exactly two raw draws per call.
  double gaussian() {
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), safe at u1=0
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  // Independent substream for a fixed purpose (batch generation, net init,
  // evaluation rollouts, ...).  Tags are small documented constants; the
  // derived seed is a splitmix64 hash of (seed, tag) so substreams never
  // overlap the parent stream.
  Rng derive(std::uint64_t tag) const {
    return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x9E3779B97F4A7C15ull)));
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace cq
