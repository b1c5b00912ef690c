#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loren/channel.hpp"
#include "loren/coderate.hpp"
#include "loren/grid.hpp"
#include "loren/hwcost.hpp"
#include "loren/receiver.hpp"
#include "loren/training.hpp"

namespace loren {

struct LinkSettings {
  int T = 14;
  int F = 128;
  std::vector<int> pilot_symbols = {2, 11};
  uint64_t pilot_seed = 11;
  int bits_per_symbol = 4;
  int ldpc_max_iters = 20;
  uint64_t ldpc_seed = 7;
};

struct EvalSettings {
  std::vector<std::string> receivers = {"baseline-perfect-csi", "baseline-ls",
                                        "neural-base", "loren"};
  std::vector<double> ebno_points_db = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  int min_block_errors = 100;
  int64_t max_blocks = 20000;
};

struct PathsSettings {
  std::string out_dir = "out";
  std::string base_weights = "base_weights.lrnw";
  std::string loren_weights = "loren_weights.lrnw";
};

// The one configuration record every command reads. Unknown fields in the
// file are rejected with the offending key path; omitted fields keep the
// defaults below; the effective (fully populated) form is what to_json_text
// emits and what each command echoes into its output directory.
struct GlobalConfig {
  int schema_version = 1;
  uint64_t seed = 1;
  LinkSettings link;
  ChannelConfig channel;
  ModelConfig model;  // T, F, num_rx, bits_per_symbol mirror link/channel
  std::vector<double> code_rates = {0.5, 0.66, 0.75};
  TrainPhaseConfig train_base;
  TrainPhaseConfig train_adapters;
  EvalSettings eval;
  hwcost::CostConfig hw;
  PathsSettings paths;

  static GlobalConfig defaults();
  static GlobalConfig from_json_text(const std::string& text,
                                     const std::string& origin = "<inline>");
  static GlobalConfig from_json_file(const std::string& path);
  std::string to_json_text() const;

  void validate() const;
  std::vector<CodeRate> cr_list() const;
  GridSpec grid_spec() const;
  // name unchanged when absolute, otherwise joined onto paths.out_dir.
  std::string resolve_path(const std::string& name) const;
};

}  // namespace loren
