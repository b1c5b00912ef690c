#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "loren/errors.hpp"
#include "loren/ldpc.hpp"
#include "loren/rng.hpp"

using namespace loren;

namespace {

std::vector<uint8_t> random_bits(int n, Rng& rng) {
  std::vector<uint8_t> bits(n);
  for (auto& b : bits) b = static_cast<uint8_t>(rng.next_u64() & 1);
  return bits;
}

std::vector<double> bits_to_llrs(const std::vector<uint8_t>& bits, double mag) {
  std::vector<double> llrs(bits.size());
  for (size_t i = 0; i < bits.size(); ++i) llrs[i] = bits[i] ? -mag : mag;
  return llrs;
}

std::filesystem::path temp_file(const char* stem) {
  return std::filesystem::temp_directory_path() / stem;
}

}  // namespace

TEST_CASE("construction keeps every column at weight 3") {
  LdpcCode code = LdpcCode::build(1024, 0.5, 7);
  std::vector<int> col_weight(static_cast<size_t>(code.n()), 0);
  for (const auto& row : code.checks())
    for (int32_t c : row) {
      REQUIRE(c >= 0);
      REQUIRE(c < code.n());
      ++col_weight[static_cast<size_t>(c)];
    }
  for (int w : col_weight) CHECK(w == 3);
}

TEST_CASE("check rows are sorted and duplicate-free") {
  LdpcCode code = LdpcCode::build(512, 0.5, 3);
  for (const auto& row : code.checks()) {
    REQUIRE(!row.empty());
    for (size_t i = 1; i < row.size(); ++i) CHECK(row[i] > row[i - 1]);
  }
}

TEST_CASE("achieved rate lands within 0.01 of the target") {
  for (double target : {0.5, 2.0 / 3.0, 0.75}) {
    for (int n : {1024, 6144}) {
      LdpcCode code = LdpcCode::build(n, target, 11);
      CHECK(std::abs(code.rate() - target) <= 0.01);
      CHECK(code.k() + code.num_checks() == code.n());
    }
  }
}

TEST_CASE("pinned dimensions at the codeword length used on the link") {
  CHECK(LdpcCode::build(6144, 0.5, 1).k() == 3072);
  CHECK(LdpcCode::build(6144, 0.66, 1).k() == 4055);
  CHECK(LdpcCode::build(6144, 2.0 / 3.0, 1).k() == 4096);
  CHECK(LdpcCode::build(6144, 0.75, 1).k() == 4608);
}

TEST_CASE("encode is systematic and satisfies every check") {
  Rng rng(21);
  LdpcCode code = LdpcCode::build(1024, 0.5, 9);
  for (int trial = 0; trial < 20; ++trial) {
    auto info = random_bits(code.k(), rng);
    auto cw = code.encode(info);
    REQUIRE(static_cast<int>(cw.size()) == code.n());
    for (int i = 0; i < code.k(); ++i) CHECK(cw[static_cast<size_t>(i)] == info[static_cast<size_t>(i)]);
    CHECK(code.syndrome_ok(cw));
  }
}

TEST_CASE("all-zero info encodes to the all-zero codeword") {
  LdpcCode code = LdpcCode::build(1024, 0.75, 5);
  auto cw = code.encode(std::vector<uint8_t>(static_cast<size_t>(code.k()), 0));
  for (uint8_t b : cw) CHECK(b == 0);
}

TEST_CASE("encoding is linear over GF(2)") {
  Rng rng(22);
  LdpcCode code = LdpcCode::build(512, 2.0 / 3.0, 13);
  auto a = random_bits(code.k(), rng);
  auto b = random_bits(code.k(), rng);
  std::vector<uint8_t> x(a.size());
  for (size_t i = 0; i < a.size(); ++i) x[i] = a[i] ^ b[i];
  auto ca = code.encode(a);
  auto cb = code.encode(b);
  auto cx = code.encode(x);
  for (size_t i = 0; i < cx.size(); ++i) CHECK(cx[i] == (ca[i] ^ cb[i]));
}

TEST_CASE("clean llrs decode in zero iterations") {
  Rng rng(23);
  LdpcCode code = LdpcCode::build(1024, 0.5, 17);
  auto cw = code.encode(random_bits(code.k(), rng));
  auto res = code.decode_bp(bits_to_llrs(cw, 20.0), 20);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.bits == cw);
}

TEST_CASE("a single flipped bit is repaired within a few iterations") {
  Rng rng(24);
  LdpcCode code = LdpcCode::build(1024, 0.5, 19);
  auto cw = code.encode(random_bits(code.k(), rng));
  for (int flip : {0, 100, 1023}) {
    auto llrs = bits_to_llrs(cw, 8.0);
    llrs[static_cast<size_t>(flip)] = -llrs[static_cast<size_t>(flip)];
    auto res = code.decode_bp(llrs, 20);
    CHECK(res.converged);
    CHECK(res.iterations <= 5);
    CHECK(res.bits == cw);
  }
}

TEST_CASE("decode of a noisy word recovers the codeword") {
  Rng rng(25);
  LdpcCode code = LdpcCode::build(1024, 0.5, 23);
  auto cw = code.encode(random_bits(code.k(), rng));
  // Moderate gaussian noise on BPSK-like llrs; decode should converge.
  auto llrs = bits_to_llrs(cw, 4.0);
  for (auto& l : llrs) l += 1.5 * rng.normal();
  auto res = code.decode_bp(llrs, 50);
  CHECK(res.converged);
  CHECK(res.bits == cw);
}

TEST_CASE("all-zero llrs hard-decide to the all-zero codeword immediately") {
  // Tie llrs decide bit 0, and the all-zero word satisfies every check, so
  // the pre-iteration hard-decision test accepts at iteration 0.
  LdpcCode code = LdpcCode::build(512, 0.5, 29);
  auto res = code.decode_bp(std::vector<double>(static_cast<size_t>(code.n()), 0.0), 5);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  for (uint8_t b : res.bits) CHECK(b == 0);
}

TEST_CASE("non-finite llrs are rejected") {
  LdpcCode code = LdpcCode::build(512, 0.5, 31);
  std::vector<double> llrs(static_cast<size_t>(code.n()), 1.0);
  llrs[7] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(code.decode_bp(llrs, 5), ShapeError);
  llrs[7] = std::nan("");
  CHECK_THROWS_AS(code.decode_bp(llrs, 5), ShapeError);
}

TEST_CASE("wrong-size inputs are rejected") {
  LdpcCode code = LdpcCode::build(512, 0.5, 37);
  CHECK_THROWS_AS(code.encode(std::vector<uint8_t>(3, 0)), ShapeError);
  CHECK_THROWS_AS(code.decode_bp(std::vector<double>(3, 0.0), 5), ShapeError);
  CHECK_THROWS_AS(code.syndrome_ok(std::vector<uint8_t>(3, 0)), ShapeError);
}

TEST_CASE("same seed rebuilds the identical code") {
  LdpcCode a = LdpcCode::build(1024, 0.5, 41);
  LdpcCode b = LdpcCode::build(1024, 0.5, 41);
  CHECK(a.k() == b.k());
  CHECK(a.checks() == b.checks());
  LdpcCode c = LdpcCode::build(1024, 0.5, 42);
  CHECK(a.checks() != c.checks());
}

TEST_CASE("save and load round-trip reproduces encode and decode") {
  Rng rng(26);
  LdpcCode code = LdpcCode::build(1024, 2.0 / 3.0, 43);
  auto path = temp_file("ldpc_roundtrip.bin");
  code.save(path.string());
  LdpcCode loaded = LdpcCode::load(path.string());
  CHECK(loaded.n() == code.n());
  CHECK(loaded.k() == code.k());
  CHECK(loaded.rank_adjustment() == code.rank_adjustment());
  CHECK(loaded.seed() == code.seed());
  CHECK(loaded.checks() == code.checks());
  auto info = random_bits(code.k(), rng);
  CHECK(loaded.encode(info) == code.encode(info));
  std::filesystem::remove(path);
}

TEST_CASE("a corrupted magic header is rejected") {
  LdpcCode code = LdpcCode::build(512, 0.5, 47);
  auto path = temp_file("ldpc_badmagic.bin");
  code.save(path.string());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS_AS(LdpcCode::load(path.string()), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("loading a missing file reports the path") {
  try {
    LdpcCode::load("/nonexistent/ldpc_code.bin");
    FAIL("expected MissingArtifactError");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/ldpc_code.bin") != std::string::npos);
  }
}
