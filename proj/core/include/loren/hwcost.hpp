#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loren::hwcost {

// Geometry the cost model reasons about. Defaults are the deployed receiver:
// 128 channels, four residual blocks, one receive antenna (3 input planes),
// 4 output LLR planes.
struct CostDims {
  int channels = 128;
  int num_res_blocks = 4;
  int kernel = 3;
  int input_channels = 3;
  int output_channels = 4;
  int T = 14;
  int F = 128;
};

struct SramDatasheet {
  double read_energy_pj_per_word = 0.0;
  double leakage_mw = 0.0;
  double area_um2 = 0.0;
};

struct CostConfig {
  CostDims dims;
  int quant_bits = 16;
  int n_code_rates = 3;
  int adapter_rank = 4;
  int num_adapter_layers = 4;
  double access_ns = 5.0;
  double clock_mhz = 200.0;
  std::string voltage = "0.9V";  // report metadata only
  double subframe_ms = 1.0;
  bool sequential_load = false;
  std::map<std::string, SramDatasheet> datasheet;  // keyed by SRAM kind

  void validate() const;
};

struct ParamCounts {
  int64_t conv_weights_per_layer = 0;  // k*k*C*C
  int64_t num_conv_layers = 0;         // 2 per residual block
  int64_t convio_weights = 0;          // conv_in + conv_out kernels
  int64_t ln_gamma_per_layer = 0;      // T*F*C
  int64_t ln_gamma_beta_per_layer = 0;
  int64_t num_ln_layers = 0;
  int64_t adapter_per_layer_per_cr = 0;  // 2*C*rank
  int64_t adapter_total_per_cr = 0;
  int64_t base_total_gamma_only = 0;  // weights + biases, gamma-only norms
  int64_t base_total_gamma_beta = 0;
};

ParamCounts count_params(const CostConfig& cfg);

enum class SramMode { Table, Analytic };

struct SramSpec {
  std::string kind;  // convolution, conv_in_out, layernorm, loren-rank<r>
  int64_t words = 0; // per SRAM instance
  int bitwidth = 0;
  int srams_per_layer = 0;  // 0 renders as n/a (the adapter rows)
  int layer_count = 0;
  bool in_use = true;

  int64_t bits_per_layer() const {
    return words * bitwidth * std::max(srams_per_layer, 1);
  }
  int64_t bits_total() const { return bits_per_layer() * layer_count; }
};

// Table mode reproduces the published inventory verbatim and requires the
// deployed geometry (it throws otherwise); analytic mode derives word counts
// from the parameter counts at any geometry, packing into banks of at most
// 4096 words. The adapter rows of the two modes disagree by design; the
// report carries the discrepancy note.
std::vector<SramSpec> map_to_srams(const ParamCounts& counts, const CostConfig& cfg,
                                   SramMode mode);

struct SwitchLatency {
  struct PerKind {
    std::string kind;
    double microseconds = 0.0;  // all SRAMs of one layer read in parallel
  };
  std::vector<PerKind> per_kind;
  double slowest_us = 0.0;
  int64_t reads_per_subframe = 0;  // floor(subframe / slowest layer read)
  double sequential_total_us = 0.0;  // every SRAM instance read back to back
};

SwitchLatency switch_latency(const std::vector<SramSpec>& inventory, double access_ns,
                             double subframe_ms);

struct StorageRow {
  int n_code_rates = 0;
  int64_t classical_bits = 0;       // n separate networks
  int64_t loren_bits = 0;           // one base + n adapter sets
  int64_t loren_bits_table = 0;     // adapter bits from the published rows; 0 off-table
  double ratio = 0.0;               // loren_bits / classical_bits
  double savings = 0.0;             // 1 - ratio
};

struct StorageCompare {
  int64_t base_bits = 0;
  int64_t adapter_bits_per_cr = 0;
  std::vector<StorageRow> rows;
};

StorageCompare storage_compare(const CostConfig& cfg,
                               const std::vector<int>& n_cr_list = {1, 2, 3, 5, 10});

struct CostEstimates {
  bool available = false;
  double switch_read_energy_nj = 0.0;
  double leakage_mw = 0.0;
  double area_mm2 = 0.0;
};

struct CostReport {
  CostConfig config;
  ParamCounts params;
  std::vector<SramSpec> table_inventory;  // empty off the deployed geometry
  std::vector<SramSpec> analytic_inventory;
  std::vector<std::string> notes;
  SwitchLatency latency;
  StorageCompare storage;
  CostEstimates estimates;

  std::string render_text() const;
  std::string srams_csv() const;
  std::string storage_csv() const;
};

CostReport build_report(const CostConfig& cfg);

}  // namespace loren::hwcost
