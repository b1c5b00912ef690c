#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace loren {

// Named sub-stream ids used with Rng::derive so every consumer of randomness
// in the pipeline draws from its own independent stream.
namespace stream {
constexpr uint64_t kInit = 1;
constexpr uint64_t kTrainBase = 2;
constexpr uint64_t kTrainAdapters = 3;
constexpr uint64_t kEval = 4;
constexpr uint64_t kHeldout = 5;
constexpr uint64_t kPilots = 6;
constexpr uint64_t kLdpc = 7;
constexpr uint64_t kInfoBits = 8;
constexpr uint64_t kChannel = 9;
constexpr uint64_t kNoise = 10;
constexpr uint64_t kAdapterInit = 11;
}  // namespace stream

// xoshiro256++ generator seeded through splitmix64. All randomness flows
// through this class so results do not depend on the standard library's
// distribution implementations, which differ across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  Rng(uint64_t seed, std::initializer_list<uint64_t> path);

  // Child stream keyed by (this stream's key, path). Streams derived with
  // different paths are statistically independent of each other and of the
  // parent; deriving is cheap enough to do per training iteration.
  Rng derive(std::initializer_list<uint64_t> path) const;

  uint64_t next_u64();
  // Uniform integer in [0, n). n must be nonzero.
  uint64_t below(uint64_t n);
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; pairs are cached.
  double normal();
  // Circularly symmetric complex normal with E|z|^2 = variance.
  std::complex<double> cnormal(double variance);
  // Single fair bit, buffered 64 at a time.
  uint8_t bit();

 private:
  void seed_state(uint64_t key);

  std::array<uint64_t, 4> state_;
  uint64_t key_;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
  uint64_t bit_buffer_ = 0;
  int bits_left_ = 0;
};

}  // namespace loren
