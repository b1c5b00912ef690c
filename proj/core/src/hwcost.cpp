#include "loren/hwcost.hpp"

#include <algorithm>
#include <cmath>

#include "loren/errors.hpp"
#include "loren/util.hpp"

namespace loren::hwcost {

namespace {

constexpr int64_t kBankWords = 4096;

bool is_deployed_geometry(const CostConfig& cfg) {
  const CostDims& d = cfg.dims;
  return d.channels == 128 && d.num_res_blocks == 4 && d.kernel == 3 &&
         d.input_channels == 3 && d.output_channels == 4 && cfg.quant_bits == 16;
}

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace

void CostConfig::validate() const {
  if (dims.channels <= 0 || dims.num_res_blocks <= 0 || dims.kernel <= 0 ||
      dims.input_channels <= 0 || dims.output_channels <= 0 || dims.T <= 0 || dims.F <= 0)
    throw ConfigError("hwcost: dimensions must be positive");
  if (dims.kernel % 2 == 0) throw ConfigError("hwcost: kernel must be odd");
  if (quant_bits <= 0) throw ConfigError("hwcost: quant_bits must be positive");
  if (n_code_rates <= 0) throw ConfigError("hwcost: n_code_rates must be positive");
  if (adapter_rank <= 0) throw ConfigError("hwcost: adapter_rank must be positive");
  if (num_adapter_layers <= 0 || num_adapter_layers > 2 * dims.num_res_blocks)
    throw ConfigError("hwcost: num_adapter_layers must fit the residual blocks");
  if (!(access_ns > 0.0)) throw ConfigError("hwcost: access_ns must be positive");
  if (!(clock_mhz > 0.0)) throw ConfigError("hwcost: clock_mhz must be positive");
  if (!(subframe_ms > 0.0)) throw ConfigError("hwcost: subframe_ms must be positive");
}

ParamCounts count_params(const CostConfig& cfg) {
  cfg.validate();
  const CostDims& d = cfg.dims;
  const int64_t k2 = static_cast<int64_t>(d.kernel) * d.kernel;
  const int64_t C = d.channels;

  ParamCounts pc;
  pc.conv_weights_per_layer = k2 * C * C;
  pc.num_conv_layers = 2LL * d.num_res_blocks;
  pc.convio_weights = k2 * d.input_channels * C + k2 * C * d.output_channels;
  pc.ln_gamma_per_layer = static_cast<int64_t>(d.T) * d.F * C;
  pc.ln_gamma_beta_per_layer = 2 * pc.ln_gamma_per_layer;
  pc.num_ln_layers = 2LL * d.num_res_blocks;
  pc.adapter_per_layer_per_cr = 2 * C * static_cast<int64_t>(cfg.adapter_rank);
  pc.adapter_total_per_cr = pc.adapter_per_layer_per_cr * cfg.num_adapter_layers;

  const int64_t conv_biases = pc.num_conv_layers * C;
  const int64_t convio_biases = C + d.output_channels;
  const int64_t body = pc.conv_weights_per_layer * pc.num_conv_layers + conv_biases +
                       pc.convio_weights + convio_biases;
  pc.base_total_gamma_only = body + pc.ln_gamma_per_layer * pc.num_ln_layers;
  pc.base_total_gamma_beta = body + pc.ln_gamma_beta_per_layer * pc.num_ln_layers;
  return pc;
}

std::vector<SramSpec> map_to_srams(const ParamCounts& counts, const CostConfig& cfg,
                                   SramMode mode) {
  cfg.validate();
  const std::string loren_kind = "loren-rank" + std::to_string(cfg.adapter_rank);

  if (mode == SramMode::Table) {
    if (!is_deployed_geometry(cfg))
      throw ConfigError(
          "hwcost: the published SRAM table only covers the deployed geometry; "
          "use analytic mode for other dimensions");
    std::vector<SramSpec> rows{
        {"convolution", 4096, 144, 4, static_cast<int>(counts.num_conv_layers), true},
        {"conv_in_out", 896, 144, 1, 1, true},
        {"layernorm", 4096, 224, 8, static_cast<int>(counts.num_ln_layers), true},
        {"loren-rank2", 768, 16, 0, cfg.num_adapter_layers, cfg.adapter_rank == 2},
        {"loren-rank4", 1536, 16, 0, cfg.num_adapter_layers, cfg.adapter_rank == 4},
        {"loren-rank8", 3072, 16, 0, cfg.num_adapter_layers, cfg.adapter_rank == 8},
    };
    return rows;
  }

  // Analytic: words at the table bitwidths, banks capped at 4096 words.
  auto pack = [](const std::string& kind, int64_t params, int quant, int bitwidth,
                 int layer_count, bool in_use) {
    const int64_t total_words = ceil_div(params * quant, bitwidth);
    const int64_t srams = ceil_div(total_words, kBankWords);
    SramSpec s;
    s.kind = kind;
    s.words = ceil_div(total_words, srams);
    s.bitwidth = bitwidth;
    s.srams_per_layer = static_cast<int>(srams);
    s.layer_count = layer_count;
    s.in_use = in_use;
    return s;
  };

  std::vector<SramSpec> rows;
  rows.push_back(pack("convolution", counts.conv_weights_per_layer, cfg.quant_bits, 144,
                      static_cast<int>(counts.num_conv_layers), true));
  rows.push_back(pack("conv_in_out", counts.convio_weights, cfg.quant_bits, 144, 1, true));
  rows.push_back(pack("layernorm", counts.ln_gamma_beta_per_layer, cfg.quant_bits, 224,
                      static_cast<int>(counts.num_ln_layers), true));
  rows.push_back(pack(loren_kind, counts.adapter_per_layer_per_cr * cfg.n_code_rates,
                      cfg.quant_bits, cfg.quant_bits, cfg.num_adapter_layers, true));
  return rows;
}

SwitchLatency switch_latency(const std::vector<SramSpec>& inventory, double access_ns,
                             double subframe_ms) {
  if (!(access_ns > 0.0)) throw ConfigError("hwcost: access_ns must be positive");
  if (!(subframe_ms > 0.0)) throw ConfigError("hwcost: subframe_ms must be positive");
  SwitchLatency lat;
  double slowest_ns = 0.0;
  for (const auto& row : inventory) {
    if (!row.in_use) continue;
    const double layer_ns = static_cast<double>(row.words) * access_ns;
    lat.per_kind.push_back({row.kind, layer_ns / 1000.0});
    slowest_ns = std::max(slowest_ns, layer_ns);
    lat.sequential_total_us += layer_ns * std::max(row.srams_per_layer, 1) *
                               row.layer_count / 1000.0;
  }
  if (slowest_ns <= 0.0) throw ConfigError("hwcost: inventory has no active rows");
  lat.slowest_us = slowest_ns / 1000.0;
  lat.reads_per_subframe =
      static_cast<int64_t>(std::floor(subframe_ms * 1e6 / slowest_ns));
  return lat;
}

StorageCompare storage_compare(const CostConfig& cfg, const std::vector<int>& n_cr_list) {
  const ParamCounts pc = count_params(cfg);

  StorageCompare sc;
  // Weight memory footprint of one deployed network: SRAM bits at the table
  // bitwidths (weights only; biases ride along in datapath registers).
  const auto analytic = map_to_srams(pc, cfg, SramMode::Analytic);
  for (const auto& row : analytic)
    if (row.kind.rfind("loren", 0) != 0) sc.base_bits += row.bits_total();
  sc.adapter_bits_per_cr = pc.adapter_total_per_cr * cfg.quant_bits;

  int64_t table_adapter_bits_per_layer = 0;
  if (is_deployed_geometry(cfg) &&
      (cfg.adapter_rank == 2 || cfg.adapter_rank == 4 || cfg.adapter_rank == 8))
    table_adapter_bits_per_layer = 384LL * cfg.adapter_rank * 16;

  std::vector<int> ns = n_cr_list;
  if (std::find(ns.begin(), ns.end(), cfg.n_code_rates) == ns.end())
    ns.push_back(cfg.n_code_rates);
  std::sort(ns.begin(), ns.end());
  for (int n : ns) {
    if (n <= 0) throw ConfigError("hwcost: code rate counts must be positive");
    StorageRow row;
    row.n_code_rates = n;
    row.classical_bits = sc.base_bits * n;
    row.loren_bits = sc.base_bits + sc.adapter_bits_per_cr * n;
    // The published row only covers the configured rate count.
    row.loren_bits_table =
        table_adapter_bits_per_layer > 0 && n == cfg.n_code_rates
            ? sc.base_bits + table_adapter_bits_per_layer * cfg.num_adapter_layers
            : 0;
    row.ratio = static_cast<double>(row.loren_bits) / static_cast<double>(row.classical_bits);
    row.savings = 1.0 - row.ratio;
    sc.rows.push_back(row);
  }
  return sc;
}

CostReport build_report(const CostConfig& cfg) {
  CostReport report;
  report.config = cfg;
  report.params = count_params(cfg);
  report.analytic_inventory = map_to_srams(report.params, cfg, SramMode::Analytic);
  if (is_deployed_geometry(cfg)) {
    report.table_inventory = map_to_srams(report.params, cfg, SramMode::Table);

    // Cross-check the published rows against the analytic packing.
    for (const auto& t : report.table_inventory) {
      if (!t.in_use) continue;
      const SramSpec* a = nullptr;
      for (const auto& row : report.analytic_inventory)
        if (row.kind == t.kind) a = &row;
      if (!a) continue;
      if (a->bits_per_layer() != t.bits_per_layer())
        report.notes.push_back(
            "published " + t.kind + " row holds " + std::to_string(t.bits_per_layer()) +
            " bits per layer but the analytic packing needs " +
            std::to_string(a->bits_per_layer()) + "; both are reported");
    }
  } else {
    report.notes.push_back("geometry differs from the deployed receiver; published "
                           "table rows are not reproduced");
  }

  const auto& inventory =
      report.table_inventory.empty() ? report.analytic_inventory : report.table_inventory;
  report.latency = switch_latency(inventory, cfg.access_ns, cfg.subframe_ms);
  report.storage = storage_compare(cfg);

  if (!cfg.datasheet.empty()) {
    report.estimates.available = true;
    for (const auto& row : inventory) {
      if (!row.in_use) continue;
      auto it = cfg.datasheet.find(row.kind);
      if (it == cfg.datasheet.end()) continue;
      const double instances =
          static_cast<double>(std::max(row.srams_per_layer, 1)) * row.layer_count;
      report.estimates.switch_read_energy_nj +=
          static_cast<double>(row.words) * instances * it->second.read_energy_pj_per_word /
          1000.0;
      report.estimates.leakage_mw += instances * it->second.leakage_mw;
      report.estimates.area_mm2 += instances * it->second.area_um2 / 1e6;
    }
  }
  return report;
}

namespace {

std::string sram_rows_text(const std::vector<SramSpec>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += "  " + r.kind + ": words=" + std::to_string(r.words) +
           " bitwidth=" + std::to_string(r.bitwidth) + " srams_per_layer=";
    out += r.srams_per_layer > 0 ? std::to_string(r.srams_per_layer) : std::string("n/a");
    out += " layers=" + std::to_string(r.layer_count);
    if (!r.in_use) out += " (unused)";
    out += '\n';
  }
  return out;
}

}  // namespace

std::string CostReport::render_text() const {
  std::string out;
  out += "operating point: " + format_double(config.clock_mhz) + " MHz, " +
         config.voltage + ", " + std::to_string(config.quant_bits) + "-bit weights\n";
  out += "parameter counts\n";
  out += "  conv weights per layer: " + std::to_string(params.conv_weights_per_layer) +
         " (x" + std::to_string(params.num_conv_layers) + " layers)\n";
  out += "  conv_in + conv_out weights: " + std::to_string(params.convio_weights) + "\n";
  out += "  layernorm per layer: gamma " + std::to_string(params.ln_gamma_per_layer) +
         ", gamma+beta " + std::to_string(params.ln_gamma_beta_per_layer) + " (x" +
         std::to_string(params.num_ln_layers) + " layers)\n";
  out += "  adapter per layer per code rate: " +
         std::to_string(params.adapter_per_layer_per_cr) + " (x" +
         std::to_string(config.num_adapter_layers) + " layers, x" +
         std::to_string(config.n_code_rates) + " rates: " +
         std::to_string(params.adapter_total_per_cr * config.n_code_rates) + ")\n";
  out += "  per conv layer across " + std::to_string(config.n_code_rates) +
         " rates: classical " +
         std::to_string(params.conv_weights_per_layer * config.n_code_rates) +
         ", adapters " +
         std::to_string(params.adapter_per_layer_per_cr * config.n_code_rates) + "\n";
  out += "  base network totals: gamma-only " +
         std::to_string(params.base_total_gamma_only) + ", gamma+beta " +
         std::to_string(params.base_total_gamma_beta) + "\n";

  if (!table_inventory.empty()) {
    out += "sram inventory (published table)\n";
    out += sram_rows_text(table_inventory);
  }
  out += "sram inventory (analytic, " + std::to_string(config.quant_bits) + "-bit)\n";
  out += sram_rows_text(analytic_inventory);

  out += "code-rate switch\n";
  for (const auto& pk : latency.per_kind)
    out += "  " + pk.kind + " layer reload: " + format_double(pk.microseconds) + " us\n";
  out += "  slowest layer reload: " + format_double(latency.slowest_us) + " us\n";
  out += "  reloads per " + format_double(config.subframe_ms) +
         " ms subframe: " + std::to_string(latency.reads_per_subframe) + "\n";
  out += "  sequential full reload: " + format_double(latency.sequential_total_us) +
         " us" + (config.sequential_load ? " (selected)" : "") + "\n";

  out += "weight storage\n";
  out += "  base network bits: " + std::to_string(storage.base_bits) + "\n";
  out += "  adapter bits per code rate: " + std::to_string(storage.adapter_bits_per_cr) +
         "\n";
  for (const auto& row : storage.rows) {
    out += "  n=" + std::to_string(row.n_code_rates) +
           ": classical=" + std::to_string(row.classical_bits) +
           " loren=" + std::to_string(row.loren_bits);
    if (row.loren_bits_table > 0)
      out += " (table packing " + std::to_string(row.loren_bits_table) + ")";
    out += " ratio=" + format_double(row.ratio) + " savings=" + format_double(row.savings) +
           "\n";
  }

  if (estimates.available) {
    out += "datasheet estimates\n";
    out += "  switch read energy: " + format_double(estimates.switch_read_energy_nj) +
           " nJ\n";
    out += "  leakage: " + format_double(estimates.leakage_mw) + " mW\n";
    out += "  area: " + format_double(estimates.area_mm2) + " mm^2\n";
  }
  for (const auto& note : notes) out += "note: " + note + "\n";
  return out;
}

std::string CostReport::srams_csv() const {
  std::string out = "mode,kind,words,bitwidth,srams_per_layer,layer_count,in_use\n";
  auto rows = [&out](const char* mode, const std::vector<SramSpec>& inv) {
    for (const auto& r : inv) {
      out += std::string(mode) + "," + r.kind + "," + std::to_string(r.words) + "," +
             std::to_string(r.bitwidth) + "," +
             (r.srams_per_layer > 0 ? std::to_string(r.srams_per_layer) : std::string("n/a")) +
             "," + std::to_string(r.layer_count) + "," + (r.in_use ? "1" : "0") + "\n";
    }
  };
  rows("table", table_inventory);
  rows("analytic", analytic_inventory);
  return out;
}

std::string CostReport::storage_csv() const {
  std::string out =
      "n_code_rates,classical_bits,loren_bits,loren_bits_table,ratio,savings\n";
  for (const auto& row : storage.rows) {
    out += std::to_string(row.n_code_rates) + "," + std::to_string(row.classical_bits) +
           "," + std::to_string(row.loren_bits) + "," +
           std::to_string(row.loren_bits_table) + "," + format_double(row.ratio) + "," +
           format_double(row.savings) + "\n";
  }
  return out;
}

}  // namespace loren::hwcost
