#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace loren {

// Regular column-weight-3 LDPC code built from a seeded socket assignment.
// Dependent parity rows are dropped, columns are permuted so the codeword is
// systematic: positions [0, k) carry information bits, [k, n) parity bits.
// The dense parity generator is recovered from the sparse rows by GF(2)
// elimination, so a code reloaded from disk encodes identically.
class LdpcCode {
 public:
  static LdpcCode build(int n, double target_rate, uint64_t seed);

  int n() const { return n_; }
  int k() const { return k_; }
  int num_checks() const { return n_ - k_; }
  double rate() const { return static_cast<double>(k_) / static_cast<double>(n_); }
  double target_rate() const { return target_rate_; }
  // Parity rows dropped during construction because they were linear
  // combinations of earlier rows.
  int rank_adjustment() const { return rank_adjustment_; }
  uint64_t seed() const { return seed_; }

  // Per parity check, ascending column indices (systematic column order).
  const std::vector<std::vector<int32_t>>& checks() const { return checks_; }

  std::vector<uint8_t> encode(const std::vector<uint8_t>& info) const;
  bool syndrome_ok(const std::vector<uint8_t>& codeword) const;

  struct DecodeResult {
    std::vector<uint8_t> bits;
    bool converged = false;
    int iterations = 0;
  };
  // Sum-product belief propagation. LLR convention: positive means bit 0.
  // Stops as soon as the hard decision satisfies every check; the incoming
  // hard decision is checked before the first iteration.
  DecodeResult decode_bp(const std::vector<double>& llrs, int max_iters) const;

  void save(const std::string& path) const;
  static LdpcCode load(const std::string& path);

 private:
  LdpcCode() = default;
  void finalize();  // derives the encoder and decoder adjacency from checks_

  int n_ = 0, k_ = 0;
  double target_rate_ = 0.0;
  uint64_t seed_ = 0;
  int rank_adjustment_ = 0;
  std::vector<std::vector<int32_t>> checks_;

  // Parity generator: per information column, the parity column it toggles,
  // bit-packed m bits in pw_ words.
  int pw_ = 0;
  std::vector<uint64_t> parity_cols_;

  // Flattened adjacency for decoding.
  std::vector<int32_t> check_offs_, check_cols_;
  std::vector<int32_t> var_offs_, var_edges_;
  int max_check_degree_ = 0;
};

}  // namespace loren
