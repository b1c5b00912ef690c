#include "loren/ldpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "loren/errors.hpp"
#include "loren/rng.hpp"

namespace loren {

namespace {

double boxplus(double a, double b) {
  const double m = std::min(std::abs(a), std::abs(b));
  const double s = ((a < 0.0) != (b < 0.0)) ? -m : m;
  return s + std::log1p(std::exp(-std::abs(a + b))) - std::log1p(std::exp(-std::abs(a - b)));
}

// Message strength standing in for certainty at degree-1 checks. Large enough
// to dominate any finite channel LLR, small enough to keep arithmetic finite.
constexpr double kHardMessage = 1e30;

struct BitRows {
  int64_t words = 0;
  std::vector<uint64_t> data;

  BitRows(int64_t rows, int64_t cols) : words((cols + 63) / 64) {
    data.assign(static_cast<size_t>(rows * words), 0);
  }
  uint64_t* row(int64_t r) { return data.data() + r * words; }
  const uint64_t* row(int64_t r) const { return data.data() + r * words; }
  void set(int64_t r, int64_t c) { row(r)[c >> 6] |= 1ULL << (c & 63); }
  bool get(int64_t r, int64_t c) const { return (row(r)[c >> 6] >> (c & 63)) & 1ULL; }
  void xor_rows(int64_t dst, int64_t src) {
    uint64_t* d = row(dst);
    const uint64_t* s = row(src);
    for (int64_t w = 0; w < words; ++w) d[w] ^= s[w];
  }
  int64_t lowest_bit(int64_t r) const {
    const uint64_t* p = row(r);
    for (int64_t w = 0; w < words; ++w)
      if (p[w]) return w * 64 + __builtin_ctzll(p[w]);
    return -1;
  }
  bool is_zero(int64_t r) const {
    const uint64_t* p = row(r);
    for (int64_t w = 0; w < words; ++w)
      if (p[w]) return false;
    return true;
  }
};

void write_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("ldpc file truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_u64(std::ofstream& out, uint64_t v) {
  write_u32(out, static_cast<uint32_t>(v));
  write_u32(out, static_cast<uint32_t>(v >> 32));
}

uint64_t read_u64(std::ifstream& in) {
  const uint64_t lo = read_u32(in);
  const uint64_t hi = read_u32(in);
  return lo | (hi << 32);
}

}  // namespace

LdpcCode LdpcCode::build(int n, double target_rate, uint64_t seed) {
  if (n <= 0) throw ConfigError("ldpc: block length must be positive");
  if (!(target_rate > 0.0 && target_rate < 1.0))
    throw ConfigError("ldpc: rate must lie in (0, 1)");
  const int m0 = n - static_cast<int>(std::llround(n * target_rate));
  if (m0 <= 3 || m0 >= n) throw ConfigError("ldpc: rate leaves no room for parity checks");

  // Socket assignment: 3n sockets, row i owning cap_i of them, shuffled; the
  // three sockets of column c name the rows of its ones.
  const int64_t sockets = 3LL * n;
  const int64_t base_cap = sockets / m0;
  const int64_t rem = sockets % m0;
  std::vector<int32_t> socket_row(static_cast<size_t>(sockets));
  {
    int64_t pos = 0;
    for (int r = 0; r < m0; ++r) {
      const int64_t cap = base_cap + (r < rem ? 1 : 0);
      for (int64_t i = 0; i < cap; ++i) socket_row[static_cast<size_t>(pos++)] = r;
    }
  }
  Rng rng(seed, {stream::kLdpc});
  for (int64_t i = sockets - 1; i > 0; --i) {
    const int64_t j = static_cast<int64_t>(rng.below(static_cast<uint64_t>(i + 1)));
    std::swap(socket_row[static_cast<size_t>(i)], socket_row[static_cast<size_t>(j)]);
  }

  // Repair columns whose three sockets repeat a row by swapping one socket
  // with a random socket elsewhere, keeping both affected columns clean.
  auto col_ok = [&](int64_t c) {
    const int32_t a = socket_row[static_cast<size_t>(3 * c)];
    const int32_t b = socket_row[static_cast<size_t>(3 * c + 1)];
    const int32_t d = socket_row[static_cast<size_t>(3 * c + 2)];
    return a != b && a != d && b != d;
  };
  int64_t repair_budget = 1000000;
  for (int64_t c = 0; c < n; ++c) {
    while (!col_ok(c)) {
      if (--repair_budget < 0) throw ConfigError("ldpc: socket repair did not converge");
      const int64_t slot = 3 * c + static_cast<int64_t>(rng.below(3));
      const int64_t other = static_cast<int64_t>(rng.below(static_cast<uint64_t>(sockets)));
      if (other / 3 == c) continue;
      std::swap(socket_row[static_cast<size_t>(slot)], socket_row[static_cast<size_t>(other)]);
      if (!col_ok(other / 3) || !col_ok(c)) {
        std::swap(socket_row[static_cast<size_t>(slot)], socket_row[static_cast<size_t>(other)]);
      }
    }
  }

  std::vector<std::vector<int32_t>> rows(static_cast<size_t>(m0));
  for (int64_t c = 0; c < n; ++c)
    for (int64_t s = 0; s < 3; ++s)
      rows[static_cast<size_t>(socket_row[static_cast<size_t>(3 * c + s)])].push_back(
          static_cast<int32_t>(c));
  for (auto& r : rows) std::sort(r.begin(), r.end());

  // Keep a maximal independent subset of the rows, tracked as a GF(2) basis
  // with one pivot column per basis row.
  BitRows basis(m0, n);
  std::vector<int64_t> pivot_of(static_cast<size_t>(m0), -1);
  std::vector<int32_t> owner(static_cast<size_t>(n), -1);
  std::vector<int32_t> kept;
  int64_t rank = 0;
  BitRows cur(1, n);
  for (int r = 0; r < m0; ++r) {
    std::memset(cur.row(0), 0, static_cast<size_t>(cur.words) * 8);
    for (int32_t c : rows[static_cast<size_t>(r)]) cur.set(0, c);
    int64_t lead;
    while ((lead = cur.lowest_bit(0)) >= 0 && owner[static_cast<size_t>(lead)] >= 0) {
      const uint64_t* s = basis.row(owner[static_cast<size_t>(lead)]);
      uint64_t* d = cur.row(0);
      for (int64_t w = 0; w < cur.words; ++w) d[w] ^= s[w];
    }
    if (lead < 0) continue;  // dependent row, dropped
    std::memcpy(basis.row(rank), cur.row(0), static_cast<size_t>(basis.words) * 8);
    pivot_of[static_cast<size_t>(rank)] = lead;
    owner[static_cast<size_t>(lead)] = static_cast<int32_t>(rank);
    kept.push_back(r);
    ++rank;
  }

  // Back-substitute to a reduced form: each pivot appears in its own row only.
  for (int64_t b = 0; b < rank; ++b) {
    const int64_t p = pivot_of[static_cast<size_t>(b)];
    for (int64_t b2 = 0; b2 < rank; ++b2)
      if (b2 != b && basis.get(b2, p)) basis.xor_rows(b2, b);
  }

  LdpcCode code;
  code.n_ = n;
  code.k_ = n - static_cast<int>(rank);
  code.target_rate_ = target_rate;
  code.seed_ = seed;
  code.rank_adjustment_ = m0 - static_cast<int>(rank);
  if (std::abs(code.rate() - target_rate) > 0.01)
    throw ConfigError("ldpc: achieved rate strays more than 0.01 from target");

  // Column permutation: information columns (non-pivots, ascending) first,
  // parity columns (pivots, ascending) last.
  std::vector<int64_t> parity_old;
  std::vector<int64_t> info_old;
  for (int64_t c = 0; c < n; ++c) {
    if (owner[static_cast<size_t>(c)] >= 0) parity_old.push_back(c);
    else info_old.push_back(c);
  }
  std::vector<int32_t> old2new(static_cast<size_t>(n));
  for (size_t u = 0; u < info_old.size(); ++u)
    old2new[static_cast<size_t>(info_old[u])] = static_cast<int32_t>(u);
  for (size_t i = 0; i < parity_old.size(); ++i)
    old2new[static_cast<size_t>(parity_old[i])] =
        static_cast<int32_t>(code.k_ + static_cast<int>(i));

  code.checks_.reserve(kept.size());
  for (int32_t r : kept) {
    std::vector<int32_t> row;
    row.reserve(rows[static_cast<size_t>(r)].size());
    for (int32_t c : rows[static_cast<size_t>(r)]) row.push_back(old2new[static_cast<size_t>(c)]);
    std::sort(row.begin(), row.end());
    code.checks_.push_back(std::move(row));
  }

  // Parity generator straight from the reduced basis: the row owning pivot
  // p_i states x_{p_i} = sum of the information bits set in it.
  const int64_t m = rank;
  code.pw_ = static_cast<int>((m + 63) / 64);
  code.parity_cols_.assign(static_cast<size_t>(code.k_) * code.pw_, 0);
  for (int64_t i = 0; i < m; ++i) {
    const int64_t b = owner[static_cast<size_t>(parity_old[static_cast<size_t>(i)])];
    for (int64_t u = 0; u < code.k_; ++u) {
      if (basis.get(b, info_old[static_cast<size_t>(u)]))
        code.parity_cols_[static_cast<size_t>(u * code.pw_ + (i >> 6))] |= 1ULL << (i & 63);
    }
  }

  code.finalize();
  return code;
}

void LdpcCode::finalize() {
  const int m = num_checks();
  check_offs_.assign(static_cast<size_t>(m) + 1, 0);
  check_cols_.clear();
  max_check_degree_ = 0;
  for (int c = 0; c < m; ++c) {
    const auto& row = checks_[static_cast<size_t>(c)];
    max_check_degree_ = std::max(max_check_degree_, static_cast<int>(row.size()));
    for (int32_t col : row) check_cols_.push_back(col);
    check_offs_[static_cast<size_t>(c) + 1] =
        static_cast<int32_t>(check_cols_.size());
  }
  std::vector<int32_t> deg(static_cast<size_t>(n_), 0);
  for (int32_t col : check_cols_) ++deg[static_cast<size_t>(col)];
  var_offs_.assign(static_cast<size_t>(n_) + 1, 0);
  for (int v = 0; v < n_; ++v)
    var_offs_[static_cast<size_t>(v) + 1] = var_offs_[static_cast<size_t>(v)] + deg[static_cast<size_t>(v)];
  var_edges_.assign(check_cols_.size(), 0);
  std::vector<int32_t> fill(var_offs_.begin(), var_offs_.end() - 1);
  for (size_t e = 0; e < check_cols_.size(); ++e) {
    const int32_t v = check_cols_[e];
    var_edges_[static_cast<size_t>(fill[static_cast<size_t>(v)]++)] = static_cast<int32_t>(e);
  }
}

std::vector<uint8_t> LdpcCode::encode(const std::vector<uint8_t>& info) const {
  if (static_cast<int>(info.size()) != k_)
    throw ShapeError("ldpc encode: expected " + std::to_string(k_) + " information bits");
  std::vector<uint8_t> cw(static_cast<size_t>(n_), 0);
  std::vector<uint64_t> acc(static_cast<size_t>(pw_), 0);
  for (int u = 0; u < k_; ++u) {
    cw[static_cast<size_t>(u)] = info[static_cast<size_t>(u)] & 1;
    if (info[static_cast<size_t>(u)] & 1) {
      const uint64_t* col = parity_cols_.data() + static_cast<size_t>(u) * pw_;
      for (int w = 0; w < pw_; ++w) acc[static_cast<size_t>(w)] ^= col[w];
    }
  }
  const int m = num_checks();
  for (int i = 0; i < m; ++i)
    cw[static_cast<size_t>(k_ + i)] =
        static_cast<uint8_t>((acc[static_cast<size_t>(i >> 6)] >> (i & 63)) & 1);
  return cw;
}

bool LdpcCode::syndrome_ok(const std::vector<uint8_t>& codeword) const {
  if (static_cast<int>(codeword.size()) != n_)
    throw ShapeError("ldpc syndrome: codeword length mismatch");
  for (const auto& row : checks_) {
    uint8_t s = 0;
    for (int32_t c : row) s ^= codeword[static_cast<size_t>(c)] & 1;
    if (s) return false;
  }
  return true;
}

LdpcCode::DecodeResult LdpcCode::decode_bp(const std::vector<double>& llrs,
                                           int max_iters) const {
  if (static_cast<int>(llrs.size()) != n_)
    throw ShapeError("ldpc decode: LLR length mismatch");
  for (double l : llrs)
    if (!std::isfinite(l)) throw ShapeError("ldpc decode: non-finite LLR");
  if (max_iters < 0) throw ShapeError("ldpc decode: negative iteration limit");

  DecodeResult res;
  res.bits.resize(static_cast<size_t>(n_));
  for (int v = 0; v < n_; ++v) res.bits[static_cast<size_t>(v)] = llrs[static_cast<size_t>(v)] < 0.0;
  if (syndrome_ok(res.bits)) {
    res.converged = true;
    res.iterations = 0;
    return res;
  }

  const int m = num_checks();
  const size_t edges = check_cols_.size();
  std::vector<double> lq(edges), lr(edges, 0.0);
  for (size_t e = 0; e < edges; ++e) lq[e] = llrs[static_cast<size_t>(check_cols_[e])];
  std::vector<double> fwd(static_cast<size_t>(max_check_degree_));
  std::vector<double> bwd(static_cast<size_t>(max_check_degree_));

  for (int it = 1; it <= max_iters; ++it) {
    for (int c = 0; c < m; ++c) {
      const int32_t e0 = check_offs_[static_cast<size_t>(c)];
      const int32_t e1 = check_offs_[static_cast<size_t>(c) + 1];
      const int d = e1 - e0;
      if (d == 1) {
        lr[static_cast<size_t>(e0)] = kHardMessage;
        continue;
      }
      fwd[0] = lq[static_cast<size_t>(e0)];
      for (int i = 1; i < d; ++i)
        fwd[static_cast<size_t>(i)] = boxplus(fwd[static_cast<size_t>(i) - 1],
                                              lq[static_cast<size_t>(e0 + i)]);
      bwd[static_cast<size_t>(d) - 1] = lq[static_cast<size_t>(e1) - 1];
      for (int i = d - 2; i >= 0; --i)
        bwd[static_cast<size_t>(i)] = boxplus(lq[static_cast<size_t>(e0 + i)],
                                              bwd[static_cast<size_t>(i) + 1]);
      lr[static_cast<size_t>(e0)] = bwd[1];
      lr[static_cast<size_t>(e1) - 1] = fwd[static_cast<size_t>(d) - 2];
      for (int i = 1; i < d - 1; ++i)
        lr[static_cast<size_t>(e0 + i)] =
            boxplus(fwd[static_cast<size_t>(i) - 1], bwd[static_cast<size_t>(i) + 1]);
    }

    for (int v = 0; v < n_; ++v) {
      double total = llrs[static_cast<size_t>(v)];
      for (int32_t e = var_offs_[static_cast<size_t>(v)]; e < var_offs_[static_cast<size_t>(v) + 1]; ++e)
        total += lr[static_cast<size_t>(var_edges_[static_cast<size_t>(e)])];
      res.bits[static_cast<size_t>(v)] = total < 0.0;
      for (int32_t e = var_offs_[static_cast<size_t>(v)]; e < var_offs_[static_cast<size_t>(v) + 1]; ++e) {
        const size_t eid = static_cast<size_t>(var_edges_[static_cast<size_t>(e)]);
        lq[eid] = total - lr[eid];
      }
    }

    if (syndrome_ok(res.bits)) {
      res.converged = true;
      res.iterations = it;
      return res;
    }
  }
  res.converged = false;
  res.iterations = max_iters;
  return res;
}

void LdpcCode::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write("LDPC", 4);
  write_u32(out, 1);  // version
  write_u32(out, static_cast<uint32_t>(n_));
  write_u32(out, static_cast<uint32_t>(k_));
  write_u64(out, seed_);
  uint64_t rate_bits;
  std::memcpy(&rate_bits, &target_rate_, 8);
  write_u64(out, rate_bits);
  write_u32(out, static_cast<uint32_t>(rank_adjustment_));
  for (const auto& row : checks_) {
    write_u32(out, static_cast<uint32_t>(row.size()));
    for (int32_t c : row) write_u32(out, static_cast<uint32_t>(c));
  }
  if (!out) throw IoError("write failed: " + path);
}

LdpcCode LdpcCode::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("ldpc file not found: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "LDPC", 4) != 0)
    throw IoError("not an ldpc file: " + path);
  const uint32_t version = read_u32(in);
  if (version != 1) throw IoError("unsupported ldpc file version");
  const int n = static_cast<int>(read_u32(in));
  const int k = static_cast<int>(read_u32(in));
  if (n <= 0 || k <= 0 || k >= n) throw IoError("ldpc file has bad dimensions");
  const uint64_t seed = read_u64(in);
  const uint64_t rate_bits = read_u64(in);
  double target_rate;
  std::memcpy(&target_rate, &rate_bits, 8);
  const int rank_adjustment = static_cast<int>(read_u32(in));
  if (!(target_rate > 0.0 && target_rate < 1.0) || rank_adjustment < 0)
    throw IoError("ldpc file has bad metadata");

  LdpcCode code;
  code.n_ = n;
  code.k_ = k;
  code.seed_ = seed;
  code.target_rate_ = target_rate;
  code.rank_adjustment_ = rank_adjustment;
  const int m = n - k;
  code.checks_.resize(static_cast<size_t>(m));
  for (int c = 0; c < m; ++c) {
    const uint32_t deg = read_u32(in);
    if (deg == 0 || deg > static_cast<uint32_t>(n)) throw IoError("ldpc file has bad row degree");
    auto& row = code.checks_[static_cast<size_t>(c)];
    row.resize(deg);
    int32_t prev = -1;
    for (uint32_t i = 0; i < deg; ++i) {
      const int32_t col = static_cast<int32_t>(read_u32(in));
      if (col <= prev || col >= n) throw IoError("ldpc file has bad column index");
      row[i] = col;
      prev = col;
    }
  }

  // Re-derive the parity generator: reduce the last m columns to identity.
  BitRows mat(m, n);
  for (int r = 0; r < m; ++r)
    for (int32_t c : code.checks_[static_cast<size_t>(r)]) mat.set(r, c);
  for (int i = 0; i < m; ++i) {
    const int64_t p = k + i;
    int r = i;
    while (r < m && !mat.get(r, p)) ++r;
    if (r == m) throw IoError("ldpc file parity block is singular");
    if (r != i)
      for (int64_t w = 0; w < mat.words; ++w) std::swap(mat.row(i)[w], mat.row(r)[w]);
    for (int r2 = 0; r2 < m; ++r2)
      if (r2 != i && mat.get(r2, p)) mat.xor_rows(r2, i);
  }
  code.pw_ = (m + 63) / 64;
  code.parity_cols_.assign(static_cast<size_t>(k) * code.pw_, 0);
  for (int i = 0; i < m; ++i)
    for (int u = 0; u < k; ++u)
      if (mat.get(i, u))
        code.parity_cols_[static_cast<size_t>(u) * code.pw_ + static_cast<size_t>(i >> 6)] |=
            1ULL << (i & 63);

  code.finalize();
  return code;
}

}  // namespace loren
