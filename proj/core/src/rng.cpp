#include "loren/rng.hpp"

#include <cmath>

#include "loren/errors.hpp"

namespace loren {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Key combiner for derive(): one splitmix round over key xor scrambled id.
uint64_t mix_key(uint64_t key, uint64_t id) {
  uint64_t x = key ^ (id * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL);
  return splitmix64(x);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void Rng::seed_state(uint64_t key) {
  key_ = key;
  uint64_t x = key;
  for (auto& s : state_) s = splitmix64(x);
  // splitmix64 never yields four zeros from any key, but keep the generator
  // well defined regardless.
  if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

Rng::Rng(uint64_t seed) { seed_state(seed); }

Rng::Rng(uint64_t seed, std::initializer_list<uint64_t> path) {
  uint64_t key = seed;
  for (uint64_t id : path) key = mix_key(key, id);
  seed_state(key);
}

Rng Rng::derive(std::initializer_list<uint64_t> path) const {
  uint64_t key = key_;
  for (uint64_t id : path) key = mix_key(key, id);
  return Rng(key);
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw ShapeError("Rng::below: n must be nonzero");
  // Multiply-shift reduction; the bias is far below anything observable here
  // and the result is reproducible everywhere.
  return static_cast<uint64_t>(
      (static_cast<__uint128_t>(next_u64()) * static_cast<__uint128_t>(n)) >> 64);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  // u1 in (0, 1] so the log argument never hits zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * kPi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return r * std::cos(theta);
}

std::complex<double> Rng::cnormal(double variance) {
  const double s = std::sqrt(variance * 0.5);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

uint8_t Rng::bit() {
  if (bits_left_ == 0) {
    bit_buffer_ = next_u64();
    bits_left_ = 64;
  }
  const uint8_t b = static_cast<uint8_t>(bit_buffer_ & 1u);
  bit_buffer_ >>= 1;
  --bits_left_;
  return b;
}

}  // namespace loren
