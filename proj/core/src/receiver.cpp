#include "loren/receiver.hpp"

#include <algorithm>
#include <cmath>

#include "loren/errors.hpp"
#include "loren/util.hpp"

namespace loren {

std::vector<std::string> ModelConfig::conv_layer_ids() const {
  std::vector<std::string> ids{"conv_in"};
  for (int i = 0; i < num_res_blocks; ++i) {
    ids.push_back("block" + std::to_string(i) + "/conv1");
    ids.push_back("block" + std::to_string(i) + "/conv2");
  }
  ids.push_back("conv_out");
  return ids;
}

std::vector<std::string> ModelConfig::adapter_eligible_layers() const {
  std::vector<std::string> ids;
  for (int i = 0; i < num_res_blocks; ++i) {
    ids.push_back("block" + std::to_string(i) + "/conv1");
    ids.push_back("block" + std::to_string(i) + "/conv2");
  }
  return ids;
}

std::vector<std::string> ModelConfig::resolved_adapter_layers() const {
  const auto eligible = adapter_eligible_layers();
  if (!adapter_layers.empty()) {
    for (const auto& id : adapter_layers)
      if (std::find(eligible.begin(), eligible.end(), id) == eligible.end())
        throw ConfigError("adapter layer '" + id + "' is not an adapter-eligible convolution");
    return adapter_layers;
  }
  if (num_adapter_layers > static_cast<int>(eligible.size()))
    throw ConfigError("num_adapter_layers exceeds the " +
                      std::to_string(eligible.size()) + " eligible convolutions");
  return {eligible.end() - num_adapter_layers, eligible.end()};
}

void ModelConfig::validate() const {
  if (T <= 0 || F <= 0) throw ConfigError("model: T and F must be positive");
  if (channels <= 0) throw ConfigError("model: channels must be positive");
  if (num_res_blocks <= 0) throw ConfigError("model: num_res_blocks must be positive");
  if (kernel <= 0 || kernel % 2 == 0) throw ConfigError("model: kernel must be odd");
  if (num_rx <= 0) throw ConfigError("model: num_rx must be positive");
  if (bits_per_symbol != 4) throw ConfigError("model: only 4 bits per symbol supported");
  if (rank <= 0) throw ConfigError("model: adapter rank must be positive");
  if (!(alpha > 0.0)) throw ConfigError("model: adapter alpha must be positive");
  if (!(ln_eps > 0.0)) throw ConfigError("model: ln_eps must be positive");
  if (num_adapter_layers <= 0) throw ConfigError("model: num_adapter_layers must be positive");
  resolved_adapter_layers();
}

namespace {

ConvLayer make_conv(const std::string& id, int k, int64_t cin, int64_t cout, Rng& rng) {
  Tensor w({k, k, cin, cout});
  const double std = std::sqrt(2.0 / (static_cast<double>(k) * k * cin));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = std * rng.normal();
  ConvLayer layer;
  layer.w = Parameter(std::move(w), "base/" + id + "/w");
  layer.b = Parameter(Tensor({cout}), "base/" + id + "/b");
  layer.id = id;
  return layer;
}

LayerNormLayer make_ln(const std::string& id, int64_t T, int64_t F, int64_t C) {
  LayerNormLayer ln;
  ln.gamma = Parameter(Tensor::full({T, F, C}, 1.0), "base/" + id + "/gamma");
  ln.beta = Parameter(Tensor({T, F, C}), "base/" + id + "/beta");
  return ln;
}

}  // namespace

BaseWeights BaseWeights::init(const ModelConfig& cfg, const Rng& rng) {
  cfg.validate();
  BaseWeights w;
  Rng r = rng.derive({stream::kInit});
  w.conv_in = make_conv("conv_in", cfg.kernel, cfg.input_channels(), cfg.channels, r);
  w.blocks.resize(static_cast<size_t>(cfg.num_res_blocks));
  for (int i = 0; i < cfg.num_res_blocks; ++i) {
    auto& blk = w.blocks[static_cast<size_t>(i)];
    const std::string prefix = "block" + std::to_string(i);
    blk.ln1 = make_ln(prefix + "/ln1", cfg.T, cfg.F, cfg.channels);
    blk.conv1 = make_conv(prefix + "/conv1", cfg.kernel, cfg.channels, cfg.channels, r);
    blk.ln2 = make_ln(prefix + "/ln2", cfg.T, cfg.F, cfg.channels);
    blk.conv2 = make_conv(prefix + "/conv2", cfg.kernel, cfg.channels, cfg.channels, r);
  }
  w.conv_out = make_conv("conv_out", cfg.kernel, cfg.channels, cfg.bits_per_symbol, r);
  return w;
}

std::vector<Parameter*> BaseWeights::params() {
  std::vector<Parameter*> out{&conv_in.w, &conv_in.b};
  for (auto& blk : blocks) {
    out.push_back(&blk.ln1.gamma);
    out.push_back(&blk.ln1.beta);
    out.push_back(&blk.conv1.w);
    out.push_back(&blk.conv1.b);
    out.push_back(&blk.ln2.gamma);
    out.push_back(&blk.ln2.beta);
    out.push_back(&blk.conv2.w);
    out.push_back(&blk.conv2.b);
  }
  out.push_back(&conv_out.w);
  out.push_back(&conv_out.b);
  return out;
}

ConvLayer* BaseWeights::find_conv(const std::string& id) {
  if (id == "conv_in") return &conv_in;
  if (id == "conv_out") return &conv_out;
  for (size_t i = 0; i < blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i);
    if (id == prefix + "/conv1") return &blocks[i].conv1;
    if (id == prefix + "/conv2") return &blocks[i].conv2;
  }
  return nullptr;
}

void BaseWeights::set_trainable(bool trainable) {
  for (Parameter* p : params()) p->trainable = trainable;
}

void BaseWeights::zero_grads() {
  for (Parameter* p : params()) p->zero_grad();
}

bool BaseWeights::grads_all_zero() const {
  for (Parameter* p : const_cast<BaseWeights*>(this)->params())
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      if (p->grad[i] != 0.0) return false;
  return true;
}

int64_t BaseWeights::param_count() const {
  int64_t total = 0;
  for (Parameter* p : const_cast<BaseWeights*>(this)->params()) total += p->value.numel();
  return total;
}

uint64_t BaseWeights::weight_checksum() const {
  uint64_t state = 0xcbf29ce484222325ULL;
  for (Parameter* p : const_cast<BaseWeights*>(this)->params()) {
    state = fnv1a(p->name.data(), p->name.size(), state);
    state = checksum(p->value, state);
  }
  return state;
}

LorenAdapter LorenAdapter::init(int64_t cin, int64_t cout, int rank, double alpha,
                                const std::string& name_prefix, Rng rng) {
  LorenAdapter a;
  a.rank = rank;
  a.alpha = alpha;
  Tensor A({cin, static_cast<int64_t>(rank)});
  const double std = std::sqrt(1.0 / static_cast<double>(cin));
  for (int64_t i = 0; i < A.numel(); ++i) A[i] = std * rng.normal();
  a.A = Parameter(std::move(A), name_prefix + "/A");
  // B starts at zero so a freshly registered adapter leaves the base network
  // exactly unchanged.
  a.B = Parameter(Tensor({static_cast<int64_t>(rank), cout}), name_prefix + "/B");
  return a;
}

void AdapterRegistry::register_cr(const ModelConfig& cfg, const BaseWeights& base,
                                  CodeRate cr, const Rng& rng) {
  AdapterSet set;
  const auto layers = cfg.resolved_adapter_layers();
  for (size_t i = 0; i < layers.size(); ++i) {
    const ConvLayer* conv = const_cast<BaseWeights&>(base).find_conv(layers[i]);
    if (!conv) throw ConfigError("adapter layer '" + layers[i] + "' not present in weights");
    const std::string prefix =
        "adapter/" + std::to_string(cr.milli) + "/" + layers[i];
    set.emplace(layers[i],
                LorenAdapter::init(conv->cin(), conv->cout(), cfg.rank, cfg.alpha, prefix,
                                   rng.derive({stream::kAdapterInit,
                                               static_cast<uint64_t>(cr.milli),
                                               static_cast<uint64_t>(i)})));
  }
  by_cr_[cr.milli] = std::move(set);
}

void AdapterRegistry::insert(int cr_milli, AdapterSet set) {
  by_cr_[cr_milli] = std::move(set);
}

std::vector<int> AdapterRegistry::registered() const {
  std::vector<int> out;
  for (const auto& [milli, _] : by_cr_) out.push_back(milli);
  return out;
}

void AdapterRegistry::switch_cr(int cr_milli) {
  if (by_cr_.find(cr_milli) == by_cr_.end())
    throw ConfigError("unknown code rate: no adapter registered for milli rate " +
                      std::to_string(cr_milli));
  active_ = cr_milli;
}

AdapterSet& AdapterRegistry::set_for(int cr_milli) {
  auto it = by_cr_.find(cr_milli);
  if (it == by_cr_.end())
    throw ConfigError("unknown code rate: no adapter registered for milli rate " +
                      std::to_string(cr_milli));
  return it->second;
}

const AdapterSet& AdapterRegistry::set_for(int cr_milli) const {
  auto it = by_cr_.find(cr_milli);
  if (it == by_cr_.end())
    throw ConfigError("unknown code rate: no adapter registered for milli rate " +
                      std::to_string(cr_milli));
  return it->second;
}

AdapterSet& AdapterRegistry::active_set() {
  if (active_ < 0) throw ConfigError("no active code rate selected");
  return set_for(active_);
}

std::vector<Parameter*> AdapterRegistry::params_for(int cr_milli) {
  std::vector<Parameter*> out;
  for (auto& [id, adapter] : set_for(cr_milli)) {
    out.push_back(&adapter.A);
    out.push_back(&adapter.B);
  }
  return out;
}

uint64_t AdapterRegistry::weight_checksum() const {
  uint64_t state = 0xcbf29ce484222325ULL;
  for (const auto& [milli, set] : by_cr_) {
    state = fnv1a(&milli, sizeof(milli), state);
    for (const auto& [id, adapter] : set) {
      state = fnv1a(id.data(), id.size(), state);
      state = checksum(adapter.A.value, state);
      state = checksum(adapter.B.value, state);
    }
  }
  return state;
}

Tensor build_input_features(const RxGrids& rx, double n0, const ModelConfig& cfg) {
  if (rx.num_rx != cfg.num_rx)
    throw ShapeError("build_input_features: antenna count mismatch");
  if (rx.T != cfg.T || rx.F != cfg.F)
    throw ShapeError("build_input_features: grid dimensions mismatch");
  if (!(n0 > 0.0)) throw ShapeError("build_input_features: n0 must be positive");

  const int C = cfg.input_channels();
  Tensor feat({cfg.T, cfg.F, C});
  const double log_n0 = std::log(n0);
  for (int t = 0; t < cfg.T; ++t) {
    for (int f = 0; f < cfg.F; ++f) {
      for (int a = 0; a < cfg.num_rx; ++a) {
        const auto v = rx.at(a, t, f);
        feat.at(t, f, 2 * a) = v.real();
        feat.at(t, f, 2 * a + 1) = v.imag();
      }
      feat.at(t, f, C - 1) = log_n0;
    }
  }
  return feat;
}

namespace {

Var conv_maybe_adapted(Tape& tape, Var x, ConvLayer& conv, AdapterSet* adapters) {
  Var y = tape.conv2d(x, tape.param(conv.w), tape.param(conv.b));
  if (adapters) {
    auto it = adapters->find(conv.id);
    if (it != adapters->end()) {
      LorenAdapter& a = it->second;
      Var u = tape.conv1x1(x, tape.param(a.A));
      Var v = tape.conv1x1(u, tape.param(a.B));
      y = tape.add(y, tape.scale(v, a.alpha / static_cast<double>(a.rank)));
    }
  }
  return y;
}

}  // namespace

Var forward_net(Tape& tape, Var features, const ModelConfig& cfg, BaseWeights& base,
                AdapterSet* adapters) {
  const std::vector<int> all_axes{0, 1, 2};
  Var h = conv_maybe_adapted(tape, features, base.conv_in, adapters);
  for (auto& blk : base.blocks) {
    Var t = tape.layer_norm(h, tape.param(blk.ln1.gamma), tape.param(blk.ln1.beta),
                            all_axes, cfg.ln_eps);
    t = tape.relu(t);
    t = conv_maybe_adapted(tape, t, blk.conv1, adapters);
    t = tape.layer_norm(t, tape.param(blk.ln2.gamma), tape.param(blk.ln2.beta),
                        all_axes, cfg.ln_eps);
    t = tape.relu(t);
    t = conv_maybe_adapted(tape, t, blk.conv2, adapters);
    h = tape.add(h, t);
  }
  return conv_maybe_adapted(tape, h, base.conv_out, adapters);
}

Tensor forward_base(const Tensor& features, const ModelConfig& cfg, BaseWeights& base) {
  Tape tape;
  Var out = forward_net(tape, tape.input(features), cfg, base, nullptr);
  return out->val();
}

Tensor forward_loren(const Tensor& features, const ModelConfig& cfg, BaseWeights& base,
                     AdapterRegistry& registry) {
  AdapterSet& set = registry.active_set();
  Tape tape;
  Var out = forward_net(tape, tape.input(features), cfg, base, &set);
  return out->val();
}

Tensor merge_adapter(const Tensor& w0, const LorenAdapter& adapter) {
  if (w0.rank() != 4) throw ShapeError("merge_adapter: kernel must be [k,k,Cin,Cout]");
  const int64_t k = w0.dim(0), cin = w0.dim(2), cout = w0.dim(3);
  if (adapter.A.value.dim(0) != cin || adapter.B.value.dim(1) != cout ||
      adapter.A.value.dim(1) != adapter.rank || adapter.B.value.dim(0) != adapter.rank)
    throw ShapeError("merge_adapter: adapter dimensions do not fit the kernel");

  Tensor merged = w0;
  const double s = adapter.alpha / static_cast<double>(adapter.rank);
  const int64_t center = ((k / 2) * k + (k / 2)) * cin * cout;
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t co = 0; co < cout; ++co) {
      double acc = 0.0;
      for (int r = 0; r < adapter.rank; ++r)
        acc += adapter.A.value[ci * adapter.rank + r] *
               adapter.B.value[static_cast<int64_t>(r) * cout + co];
      merged[center + ci * cout + co] += s * acc;
    }
  }
  return merged;
}

int64_t adapter_params_per_cr(const ModelConfig& cfg) {
  // Eligible layers are the C -> C block convolutions, so each adapter holds
  // (C + C) * rank values.
  const int64_t per_layer = static_cast<int64_t>(2 * cfg.channels) * cfg.rank;
  return per_layer * static_cast<int64_t>(cfg.resolved_adapter_layers().size());
}

}  // namespace loren
