#include "loren/qam.hpp"

#include <algorithm>
#include <cmath>

#include "loren/errors.hpp"

namespace loren {

namespace {
const double kScale = 1.0 / std::sqrt(10.0);

double lse_pair_max(const double* vals, int count) {
  double m = vals[0];
  for (int i = 1; i < count; ++i) m = std::max(m, vals[i]);
  return m;
}
}  // namespace

double Qam16::level(uint8_t hi, uint8_t lo) {
  // Gray order 00, 01, 11, 10 over {-3, -1, +1, +3}.
  static const double table[4] = {-3.0, -1.0, +3.0, +1.0};  // indexed by hi*2+lo
  return table[(hi << 1) | lo] * kScale;
}

Qam16::Qam16() {
  for (int s = 0; s < 16; ++s) {
    const uint8_t b0 = (s >> 3) & 1, b1 = (s >> 2) & 1, b2 = (s >> 1) & 1, b3 = s & 1;
    points_[static_cast<size_t>(s)] = {level(b0, b1), level(b2, b3)};
  }
}

std::complex<double> Qam16::map_bits(const uint8_t* b) const {
  const int s = ((b[0] & 1) << 3) | ((b[1] & 1) << 2) | ((b[2] & 1) << 1) | (b[3] & 1);
  return points_[static_cast<size_t>(s)];
}

std::vector<std::complex<double>> Qam16::map(const std::vector<uint8_t>& bits) const {
  if (bits.size() % kBitsPerSymbol != 0)
    throw ShapeError("qam16 map: bit count must be a multiple of 4");
  std::vector<std::complex<double>> out(bits.size() / kBitsPerSymbol);
  for (size_t i = 0; i < out.size(); ++i) out[i] = map_bits(bits.data() + 4 * i);
  return out;
}

std::array<double, 4> Qam16::demap_llr(std::complex<double> y, std::complex<double> h,
                                       double n0) const {
  if (!(n0 > 0.0)) throw ShapeError("qam16 demap: noise variance must be positive");
  double metric[16];
  for (int s = 0; s < 16; ++s) {
    const std::complex<double> d = y - h * points_[static_cast<size_t>(s)];
    metric[s] = -std::norm(d) / n0;
  }
  std::array<double, 4> llr{};
  for (int bit = 0; bit < 4; ++bit) {
    double m0[8], m1[8];
    int c0 = 0, c1 = 0;
    for (int s = 0; s < 16; ++s) {
      if ((s >> (3 - bit)) & 1) m1[c1++] = metric[s];
      else m0[c0++] = metric[s];
    }
    const double peak0 = lse_pair_max(m0, 8), peak1 = lse_pair_max(m1, 8);
    double sum0 = 0.0, sum1 = 0.0;
    for (int i = 0; i < 8; ++i) {
      sum0 += std::exp(m0[i] - peak0);
      sum1 += std::exp(m1[i] - peak1);
    }
    llr[static_cast<size_t>(bit)] = (peak0 + std::log(sum0)) - (peak1 + std::log(sum1));
  }
  return llr;
}

}  // namespace loren
