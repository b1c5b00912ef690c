#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "loren/channel.hpp"
#include "loren/coderate.hpp"
#include "loren/grid.hpp"
#include "loren/ldpc.hpp"
#include "loren/qam.hpp"
#include "loren/receiver.hpp"
#include "loren/weights_io.hpp"

namespace loren {

struct OptimizerConfig {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Steps named parameters from their accumulated gradients. Adam moments are
// keyed by parameter name with a per-parameter step count, so parameters that
// sit out iterations (inactive adapters) keep unbiased corrections.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<Parameter*>& params);
  const OptimizerConfig& config() const { return cfg_; }

  void save_state(std::vector<ContainerEntry>* out) const;
  void load_state(const std::vector<ContainerEntry>& entries);

 private:
  struct Slot {
    Tensor m, v;
    uint64_t t = 0;
  };
  OptimizerConfig cfg_;
  std::map<std::string, Slot> slots_;
};

struct TrainPhaseConfig {
  int iterations = 2000;
  int batch_size = 1;
  double ebno_lo_db = -2.0;
  double ebno_hi_db = 12.0;
  OptimizerConfig optimizer;
  int checkpoint_every = 0;  // 0 disables checkpointing
  std::string checkpoint_path;
};

struct TrainLogEntry {
  int iteration = 0;
  int cr_milli = 0;
  double ebno_db = 0.0;
  double loss = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  double wall_seconds = 0.0;  // kept out of the CSV

  std::map<int, double> mean_loss_per_cr() const;
  double mean_loss_last(size_t count) const;
  void write_csv(const std::string& path) const;
};

// Transmitter, channel and code cache shared by training and evaluation.
// Codes are built once per code rate and reused; the cache is thread safe.
class LinkContext {
 public:
  GridSpec grid;
  ChannelConfig channel;
  Qam16 qam;
  int ldpc_max_iters = 20;
  uint64_t ldpc_seed = 7;
  std::vector<int32_t> data_res;

  LinkContext() : mu_(std::make_unique<std::mutex>()) {}
  LinkContext(LinkContext&&) = default;
  LinkContext& operator=(LinkContext&&) = default;

  static LinkContext make(GridSpec grid, ChannelConfig channel, int ldpc_max_iters = 20,
                          uint64_t ldpc_seed = 7);

  double data_re_fraction() const {
    return static_cast<double>(grid.data_re_count()) /
           (static_cast<double>(grid.T) * grid.F);
  }
  const LdpcCode& code_for(CodeRate cr);

 private:
  std::unique_ptr<std::mutex> mu_;
  std::map<int, std::unique_ptr<LdpcCode>> codes_;
};

struct BlockSample {
  std::vector<uint8_t> info;
  std::vector<uint8_t> coded;
  RxGrids rx;
  ChannelRealization chan;
  double n0 = 0.0;
};

// One full transmit-and-receive draw: information bits, encoding, mapping,
// channel and noise. Sub-draws use streams derived from rng's key, so their
// values do not depend on how much state rng itself has consumed.
BlockSample simulate_block(LinkContext& ctx, CodeRate cr, double ebno_db, const Rng& rng);

struct BaseTrainResult {
  BaseWeights weights;
  TrainLog log;
};

// Phase one: trains the base network across all code rates, sampling Eb/N0
// uniformly from the configured range each iteration.
BaseTrainResult train_base(const ModelConfig& cfg, LinkContext& ctx,
                           const std::vector<CodeRate>& crs, const TrainPhaseConfig& phase,
                           uint64_t seed, const std::string& resume_checkpoint = "");

struct AdapterTrainResult {
  AdapterRegistry registry;
  TrainLog log;
};

// Phase two: freezes the base and trains one adapter set per code rate; each
// iteration steps only the adapters of the code rate it drew.
AdapterTrainResult train_adapters(const ModelConfig& cfg, LinkContext& ctx,
                                  BaseWeights& base, const std::vector<CodeRate>& crs,
                                  const TrainPhaseConfig& phase, uint64_t seed,
                                  const std::string& resume_checkpoint = "");

// Mean BCE loss over fresh blocks at the given code rate; registry == nullptr
// evaluates the bare base network.
double evaluate_loss(const ModelConfig& cfg, LinkContext& ctx, BaseWeights& base,
                     AdapterRegistry* registry, CodeRate cr, int num_blocks,
                     double ebno_lo_db, double ebno_hi_db, uint64_t seed);

// Checked wrapper pairing a [N, bits] LLR tensor with the coded bits.
double bce_llr_loss(const Tensor& llrs, const std::vector<uint8_t>& coded_bits);

}  // namespace loren
