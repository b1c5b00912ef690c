#pragma once

#include <map>
#include <string>
#include <vector>

#include "loren/autodiff.hpp"
#include "loren/coderate.hpp"
#include "loren/grid.hpp"
#include "loren/rng.hpp"
#include "loren/tensor.hpp"

namespace loren {

// Architecture of the convolutional receiver: conv_in lifts the received
// grid into `channels` feature maps, `num_res_blocks` pre-activation
// residual blocks follow (layer_norm, relu, conv twice each), and conv_out
// emits one LLR plane per coded bit.
struct ModelConfig {
  int T = 14, F = 128;
  int channels = 32;
  int num_res_blocks = 2;
  int kernel = 3;
  int num_rx = 2;
  int bits_per_symbol = 4;
  double ln_eps = 1e-6;

  // Adapter settings: rank of the update, its scale alpha, and which of the
  // residual-block convolutions carry adapters. An empty adapter_layers list
  // means the last num_adapter_layers eligible convolutions.
  int rank = 4;
  double alpha = 1.0;
  int num_adapter_layers = 2;
  std::vector<std::string> adapter_layers;

  int input_channels() const { return 2 * num_rx + 1; }
  // Every convolution in forward order.
  std::vector<std::string> conv_layer_ids() const;
  // Convolutions that may carry an adapter: the square C -> C ones inside
  // residual blocks.
  std::vector<std::string> adapter_eligible_layers() const;
  std::vector<std::string> resolved_adapter_layers() const;
  void validate() const;
};

struct ConvLayer {
  Parameter w;  // [k,k,Cin,Cout]
  Parameter b;  // [Cout]
  std::string id;
  int64_t cin() const { return w.value.dim(2); }
  int64_t cout() const { return w.value.dim(3); }
};

struct LayerNormLayer {
  Parameter gamma, beta;  // full-grid [T,F,C]
};

struct BaseWeights {
  struct Block {
    LayerNormLayer ln1;
    ConvLayer conv1;
    LayerNormLayer ln2;
    ConvLayer conv2;
  };
  ConvLayer conv_in;
  std::vector<Block> blocks;
  ConvLayer conv_out;

  // He-normal convolution kernels, zero biases, identity layer norms.
  static BaseWeights init(const ModelConfig& cfg, const Rng& rng);

  std::vector<Parameter*> params();
  ConvLayer* find_conv(const std::string& id);
  void set_trainable(bool trainable);
  void zero_grads();
  bool grads_all_zero() const;
  int64_t param_count() const;
  uint64_t weight_checksum() const;
};

// Low-rank adapter for one convolution: the effective kernel is
// W0 + (alpha/rank) * A B applied at the kernel's center tap, realized in the
// forward pass as two 1x1 convolutions on the layer input.
struct LorenAdapter {
  Parameter A;  // [Cin, rank]
  Parameter B;  // [rank, Cout]
  int rank = 0;
  double alpha = 1.0;

  static LorenAdapter init(int64_t cin, int64_t cout, int rank, double alpha,
                           const std::string& name_prefix, Rng rng);
};

using AdapterSet = std::map<std::string, LorenAdapter>;  // keyed by layer id

// Adapter sets per code rate, keyed by milli rate. Switching the active rate
// is a constant-time bookkeeping update; no tensor is touched.
class AdapterRegistry {
 public:
  void register_cr(const ModelConfig& cfg, const BaseWeights& base, CodeRate cr,
                   const Rng& rng);
  void insert(int cr_milli, AdapterSet set);
  bool has(int cr_milli) const { return by_cr_.count(cr_milli) != 0; }
  std::vector<int> registered() const;
  void switch_cr(int cr_milli);
  int active_cr() const { return active_; }
  AdapterSet& set_for(int cr_milli);
  const AdapterSet& set_for(int cr_milli) const;
  AdapterSet& active_set();
  std::vector<Parameter*> params_for(int cr_milli);
  uint64_t weight_checksum() const;
  bool empty() const { return by_cr_.empty(); }

 private:
  std::map<int, AdapterSet> by_cr_;
  int active_ = -1;
};

// Stacks Re/Im planes per antenna plus one log(n0) plane: [T, F, 2*num_rx+1].
Tensor build_input_features(const RxGrids& rx, double n0, const ModelConfig& cfg);

// Taped forward pass; adapters, when given, wrap their layers with the
// low-rank branch. Returns the [T, F, bits_per_symbol] LLR grid node.
Var forward_net(Tape& tape, Var features, const ModelConfig& cfg, BaseWeights& base,
                AdapterSet* adapters);

// Convenience untaped passes for evaluation.
Tensor forward_base(const Tensor& features, const ModelConfig& cfg, BaseWeights& base);
Tensor forward_loren(const Tensor& features, const ModelConfig& cfg, BaseWeights& base,
                     AdapterRegistry& registry);

// W0 + (alpha/rank) * A B folded into the kernel center tap.
Tensor merge_adapter(const Tensor& w0, const LorenAdapter& adapter);

int64_t adapter_params_per_cr(const ModelConfig& cfg);

}  // namespace loren
