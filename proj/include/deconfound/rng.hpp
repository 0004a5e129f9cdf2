#pragma once

#include <cmath>
#include <cstdint>

namespace deconfound {

// Splittable counter-based stream in the SplittableRandom style: the state
// walks a fixed odd increment and every output is a strong 64-bit mix of the
// counter, so a stream is a pure function of (master_seed, replication,
// substream, draw index). Replications can therefore run in any order, or in
// parallel, and reproduce bit-identical draws. Distribution transforms are
// spelled out here (instead of <random> adaptors) because libstdc++/libc++
// distributions are not bit-compatible.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t replication,
            std::uint64_t substream) {
    std::uint64_t s = mix(master_seed + kGamma);
    s = mix(s ^ (replication * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
    s = mix(s ^ (substream * 0xda942042e4dd58b5ull + 1ull));
    state_ = s;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1); never returns an endpoint, so it is
  // safe inside log() and logit transforms.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare draw is cached so consecutive
  // calls consume uniforms at a deterministic rate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Substream ids shared by the generators and the experiment harness. Data
// splits get fixed slots so that e.g. a replication's training sample does
// not depend on how many test environments follow it.
namespace substream {
inline constexpr std::uint64_t kTrain = 0;
// Test environment e (0-based) draws from substream 1 + e; single-test-set
// designs use environment 0.
inline constexpr std::uint64_t test_env(std::uint64_t e) { return 1 + e; }
// Second dataset pair of a replication (model-mispecification arm).
inline constexpr std::uint64_t kTrainMispec = 16;
inline constexpr std::uint64_t kTestMispec = 17;
// Parameter draws for the replication's data-generating process.
inline constexpr std::uint64_t kParams = 31;
}  // namespace substream

}  // namespace deconfound
