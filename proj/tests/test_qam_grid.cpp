#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>

#include "loren/errors.hpp"
#include "loren/grid.hpp"
#include "loren/qam.hpp"
#include "loren/rng.hpp"
#include "oracles.hpp"

using namespace loren;

namespace {

int hamming(int a, int b) { return __builtin_popcount(static_cast<unsigned>(a ^ b)); }

std::vector<uint8_t> nibble_bits(int v) {
  return {static_cast<uint8_t>((v >> 3) & 1), static_cast<uint8_t>((v >> 2) & 1),
          static_cast<uint8_t>((v >> 1) & 1), static_cast<uint8_t>(v & 1)};
}

GridSpec small_spec(int T = 6, int F = 8, uint64_t pilot_seed = 5) {
  GridSpec spec;
  spec.T = T;
  spec.F = F;
  spec.bits_per_symbol = 4;
  spec.pilots = PilotPattern::qpsk({1, 4}, F, pilot_seed);
  return spec;
}

}  // namespace

TEST_CASE("constellation has unit mean energy and 16 distinct points") {
  Qam16 qam;
  double energy = 0;
  std::set<std::pair<double, double>> uniq;
  for (const auto& p : qam.points()) {
    energy += std::norm(p);
    uniq.insert({p.real(), p.imag()});
  }
  CHECK(energy / 16.0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(uniq.size() == 16);
}

TEST_CASE("constellation matches the independently derived gray table") {
  Qam16 qam;
  auto want = oracles::qam16_points();
  for (int v = 0; v < 16; ++v) {
    CHECK(qam.points()[static_cast<size_t>(v)].real() ==
          doctest::Approx(want[static_cast<size_t>(v)].real()).epsilon(1e-15));
    CHECK(qam.points()[static_cast<size_t>(v)].imag() ==
          doctest::Approx(want[static_cast<size_t>(v)].imag()).epsilon(1e-15));
  }
}

TEST_CASE("per-axis labels follow the 00 01 11 10 gray order") {
  const double s = 1.0 / std::sqrt(10.0);
  CHECK(Qam16::level(0, 0) == doctest::Approx(-3 * s));
  CHECK(Qam16::level(0, 1) == doctest::Approx(-1 * s));
  CHECK(Qam16::level(1, 1) == doctest::Approx(+1 * s));
  CHECK(Qam16::level(1, 0) == doctest::Approx(+3 * s));
}

TEST_CASE("axis neighbours differ in exactly one bit") {
  Qam16 qam;
  const double s = 1.0 / std::sqrt(10.0);
  // Walk the I axis at fixed Q and check the gray property geometrically:
  // points at adjacent levels must differ in exactly one of the 4 bits.
  for (int a = 0; a < 16; ++a) {
    for (int b = 0; b < 16; ++b) {
      auto pa = qam.points()[static_cast<size_t>(a)];
      auto pb = qam.points()[static_cast<size_t>(b)];
      const bool i_adjacent = std::abs(std::abs(pa.real() - pb.real()) - 2 * s) < 1e-12 &&
                              std::abs(pa.imag() - pb.imag()) < 1e-12;
      const bool q_adjacent = std::abs(std::abs(pa.imag() - pb.imag()) - 2 * s) < 1e-12 &&
                              std::abs(pa.real() - pb.real()) < 1e-12;
      if (i_adjacent || q_adjacent) CHECK(hamming(a, b) == 1);
    }
  }
}

TEST_CASE("map_bits is a bijection consistent with the point table") {
  Qam16 qam;
  for (int v = 0; v < 16; ++v) {
    auto bits = nibble_bits(v);
    auto p = qam.map_bits(bits.data());
    CHECK(p == qam.points()[static_cast<size_t>(v)]);
  }
}

TEST_CASE("map consumes bits four at a time") {
  Qam16 qam;
  std::vector<uint8_t> bits = {0, 0, 0, 0, 1, 0, 1, 0};
  auto syms = qam.map(bits);
  REQUIRE(syms.size() == 2);
  CHECK(syms[0] == qam.points()[0]);
  CHECK(syms[1] == qam.points()[0b1010]);
  CHECK_THROWS_AS(qam.map({0, 1, 0}), ShapeError);
}

TEST_CASE("demapper agrees with the slow log-sum-exp oracle") {
  Qam16 qam;
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    std::complex<double> y = rng.cnormal(1.0);
    std::complex<double> h = rng.cnormal(1.0);
    double n0 = 0.05 + rng.uniform();
    auto got = qam.demap_llr(y, h, n0);
    auto want = oracles::demap_llr(y, h, n0);
    for (int bit = 0; bit < 4; ++bit)
      CHECK(std::abs(got[static_cast<size_t>(bit)] - want[static_cast<size_t>(bit)]) <= 1e-9);
  }
}

TEST_CASE("noise-free demap of a constellation point recovers its bits") {
  Qam16 qam;
  for (int v = 0; v < 16; ++v) {
    auto bits = nibble_bits(v);
    auto llr = qam.demap_llr(qam.points()[static_cast<size_t>(v)], {1.0, 0.0}, 1e-4);
    for (int bit = 0; bit < 4; ++bit) {
      // positive llr = bit 0
      if (bits[static_cast<size_t>(bit)] == 0)
        CHECK(llr[static_cast<size_t>(bit)] > 10.0);
      else
        CHECK(llr[static_cast<size_t>(bit)] < -10.0);
    }
  }
}

TEST_CASE("demap is invariant to a common phase rotation of y and h") {
  Qam16 qam;
  Rng rng(32);
  const std::complex<double> rot = std::polar(1.0, 0.7);
  for (int trial = 0; trial < 50; ++trial) {
    std::complex<double> y = rng.cnormal(1.0);
    std::complex<double> h = rng.cnormal(1.0);
    double n0 = 0.3;
    auto a = qam.demap_llr(y, h, n0);
    auto b = qam.demap_llr(rot * y, rot * h, n0);
    for (int bit = 0; bit < 4; ++bit)
      CHECK(a[static_cast<size_t>(bit)] ==
            doctest::Approx(b[static_cast<size_t>(bit)]).epsilon(1e-9));
  }
}

TEST_CASE("pilot pattern drawing is seeded and unit power") {
  auto p = PilotPattern::qpsk({2, 11}, 128, 77);
  REQUIRE(p.values.size() == 2 * 128);
  for (const auto& v : p.values) {
    CHECK(std::abs(std::norm(v) - 1.0) < 1e-12);
    CHECK(std::abs(std::abs(v.real()) - std::abs(v.imag())) < 1e-12);  // QPSK
  }
  auto q = PilotPattern::qpsk({2, 11}, 128, 77);
  CHECK(p.values == q.values);
  auto r = PilotPattern::qpsk({2, 11}, 128, 78);
  CHECK(p.values != r.values);

  CHECK(p.is_pilot_symbol(2));
  CHECK_FALSE(p.is_pilot_symbol(3));
  CHECK(p.pilot_row(11) == 1);
  CHECK(p.pilot_row(0) == -1);
}

TEST_CASE("default geometry carries one 6144-bit codeword") {
  GridSpec spec;
  spec.pilots = PilotPattern::qpsk({2, 11}, 128, 1);
  spec.validate();
  CHECK(spec.data_symbols() == 12);
  CHECK(spec.data_re_count() == 1536);
  CHECK(spec.codeword_bits() == 6144);
}

TEST_CASE("data re enumeration skips exactly the pilot symbols") {
  GridSpec spec = small_spec();
  auto flat = spec.data_re_flat();
  REQUIRE(static_cast<int>(flat.size()) == spec.data_re_count());
  std::set<int32_t> seen(flat.begin(), flat.end());
  CHECK(seen.size() == flat.size());
  for (int32_t idx : flat) {
    int t = idx / spec.F;
    CHECK(t != 1);
    CHECK(t != 4);
  }
  // t-major ascending
  for (size_t i = 1; i < flat.size(); ++i) CHECK(flat[i] > flat[i - 1]);
}

TEST_CASE("assemble and extract round-trip the data symbols") {
  GridSpec spec = small_spec();
  Rng rng(33);
  std::vector<std::complex<double>> data(static_cast<size_t>(spec.data_re_count()));
  for (auto& d : data) d = rng.cnormal(1.0);
  ResourceGrid grid = assemble_grid(spec, data);
  CHECK(extract_data(spec, grid) == data);

  // Pilot cells carry the pattern values.
  for (size_t row = 0; row < spec.pilots.pilot_symbols.size(); ++row) {
    int t = spec.pilots.pilot_symbols[row];
    for (int f = 0; f < spec.F; ++f)
      CHECK(grid.at(t, f) == spec.pilots.values[row * static_cast<size_t>(spec.F) + f]);
  }
}

TEST_CASE("assemble rejects a data vector of the wrong length") {
  GridSpec spec = small_spec();
  std::vector<std::complex<double>> data(3);
  CHECK_THROWS_AS(assemble_grid(spec, data), ShapeError);
}

TEST_CASE("grid validation rejects malformed pilot layouts") {
  GridSpec spec = small_spec();
  spec.pilots.pilot_symbols = {4, 1};  // not ascending
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.pilots.pilot_symbols = {1, 99};  // out of range
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.T = 2;  // no data symbols left
  spec.pilots = PilotPattern::qpsk({0, 1}, spec.F, 1);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
