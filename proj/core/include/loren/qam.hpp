#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace loren {

// Gray-labeled unit-energy QAM-16. Bits (b0, b1) pick the in-phase level and
// (b2, b3) the quadrature level; per-axis labels 00, 01, 11, 10 run across
// levels {-3, -1, +1, +3}/sqrt(10), so neighbouring points differ in one bit.
class Qam16 {
 public:
  static constexpr int kBitsPerSymbol = 4;

  Qam16();

  const std::array<std::complex<double>, 16>& points() const { return points_; }

  // Per-axis Gray map of two bits to an amplitude level.
  static double level(uint8_t hi, uint8_t lo);

  std::complex<double> map_bits(const uint8_t* b) const;
  std::vector<std::complex<double>> map(const std::vector<uint8_t>& bits) const;

  // Exact posterior LLRs (log-sum-exp over all 16 hypotheses) for one
  // received sample y with channel gain h and complex noise variance n0.
  // Positive LLR means bit 0.
  std::array<double, 4> demap_llr(std::complex<double> y, std::complex<double> h,
                                  double n0) const;

 private:
  std::array<std::complex<double>, 16> points_;
};

}  // namespace loren
