#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace mscbo {

// Keyed, counter-derived random substreams.
//
// Every stochastic site in the solvers draws from its own substream, keyed by
// (seed, site tag, outer step, branch index). Streams are single-owner, so a
// run's output is a pure function of (inputs, seed) no matter how the
// branches are scheduled across workers.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// Stream tags; one per independent noise site.
enum class rng_site : std::uint64_t {
  init_x = 1,
  init_y = 2,
  init_r = 3,
  phase = 4,        // per (outer step, branch) solver noise
  coupled = 5,      // per (step, branch) noise of the coupled integrator
  frozen = 6,       // frozen fast-system integrator
  diagnostics = 7,  // random state draws for checks
};

// xoshiro256** seeded through splitmix64 from the key words.
class rng_stream {
 public:
  rng_stream(std::uint64_t seed, rng_site site, std::uint64_t a = 0,
             std::uint64_t b = 0) {
    std::uint64_t key = seed;
    key ^= detail::splitmix64(key) + static_cast<std::uint64_t>(site);
    key ^= detail::splitmix64(key) + a;
    key ^= detail::splitmix64(key) + b;
    for (auto& w : s_) w = detail::splitmix64(key);
    has_spare_ = false;
    spare_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  // uniform on [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via the Marsaglia polar method
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, q;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      q = u * u + v * v;
    } while (q >= 1.0 || q == 0.0);
    const double f = std::sqrt(-2.0 * std::log(q) / q);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  void fill_normal(std::span<double> out, double stddev) {
    for (auto& x : out) x = stddev * normal();
  }

  void fill_uniform(std::span<double> out, double lo, double hi) {
    for (auto& x : out) x = uniform(lo, hi);
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_;
  double spare_;
};

}  // namespace mscbo
