#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loren/coderate.hpp"
#include "loren/receiver.hpp"
#include "loren/training.hpp"

namespace loren {

enum class ReceiverKind { BaselinePerfectCsi, BaselineLs, NeuralBase, Loren };

std::string receiver_label(ReceiverKind kind);
ReceiverKind receiver_from_label(const std::string& label);

struct StoppingRule {
  int min_block_errors = 100;
  int64_t max_blocks = 20000;
};

struct BlerPoint {
  std::string receiver;
  CodeRate cr;
  double ebno_db = 0.0;
  int64_t blocks = 0;
  int64_t errors = 0;
  double bler = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  uint64_t seed = 0;
};

struct WilsonInterval {
  double lo = 0.0, hi = 1.0;
};
// 95% Wilson score interval; always contains errors/blocks.
WilsonInterval wilson95(int64_t errors, int64_t blocks);

// Weights given to neural receivers; null members are allowed as long as no
// neural receiver is requested.
struct NeuralReceiverSet {
  const ModelConfig* cfg = nullptr;
  BaseWeights* base = nullptr;
  AdapterRegistry* registry = nullptr;
};

// Monte-Carlo block error rate at one (receiver, code rate, Eb/N0) point.
// Every block draws its own seed-derived stream keyed by its index, so the
// result is identical for any worker count and the same blocks are replayed
// for every receiver evaluated at the same point and seed.
BlerPoint run_bler_point(LinkContext& ctx, const NeuralReceiverSet& neural,
                         ReceiverKind kind, CodeRate cr, double ebno_db,
                         const StoppingRule& stop, uint64_t seed, int workers = 1);

struct SweepConfig {
  std::vector<ReceiverKind> receivers;
  std::vector<CodeRate> crs;
  std::vector<double> ebno_points_db;
  StoppingRule stop;
  uint64_t seed = 1;
  int workers = 1;
};

std::vector<BlerPoint> sweep(LinkContext& ctx, const NeuralReceiverSet& neural,
                             const SweepConfig& cfg);

void write_bler_csv(const std::string& path, const std::vector<BlerPoint>& points);
std::vector<BlerPoint> parse_bler_csv(const std::string& text);
std::vector<BlerPoint> read_bler_csv(const std::string& path);

struct CompareEntry {
  std::string receiver;
  double bler = 0.0, ci_lo = 0.0, ci_hi = 1.0;
};

struct ComparePoint {
  CodeRate cr;
  double ebno_db = 0.0;
  std::vector<CompareEntry> ranked;  // ascending BLER
  bool has_loren_and_ls = false;
  bool loren_not_worse = false;  // bler(loren) <= bler(baseline-ls)
};

struct CompareReport {
  std::vector<ComparePoint> points;
  std::string render() const;
};

// Groups points by (cr, Eb/N0); every receiver must cover the same grid.
CompareReport compare_report(const std::vector<BlerPoint>& points);

}  // namespace loren
