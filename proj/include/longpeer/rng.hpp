#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace longpeer {

// Deterministic stream splitting: a master seed plus (replicate, purpose)
// tags are mixed through SplitMix64 into an mt19937_64 seed, so replicate k
// is reproducible in isolation and streams never overlap by construction.
// Draws avoid std distributions, whose sequences are implementation defined.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0, 1)
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {  // Box-Muller, pairwise
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

enum class StreamPurpose : uint64_t {
  predictors = 1,
  subject_effects = 2,
  outcome_noise = 3,
  auxiliary = 4,
};

inline RngStream make_stream(uint64_t master_seed, uint64_t replicate,
                             StreamPurpose purpose) {
  uint64_t s = splitmix64(master_seed);
  s = splitmix64(s ^ (0x517cc1b727220a95ull + replicate));
  s = splitmix64(s ^ (0xd1b54a32d192ed03ull * static_cast<uint64_t>(purpose)));
  return RngStream(s);
}

}  // namespace longpeer
