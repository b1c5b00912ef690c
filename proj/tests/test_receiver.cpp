#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "loren/errors.hpp"
#include "loren/receiver.hpp"
#include "loren/rng.hpp"
#include "loren/weights_io.hpp"

using namespace loren;

namespace {

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.T = 4;
  cfg.F = 8;
  cfg.channels = 8;
  cfg.num_res_blocks = 2;
  cfg.num_rx = 2;
  cfg.rank = 2;
  cfg.num_adapter_layers = 2;
  return cfg;
}

Tensor random_features(const ModelConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  Tensor x({cfg.T, cfg.F, cfg.input_channels()});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.normal();
  return x;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.numel())) == 0;
}

std::filesystem::path temp_file(const char* stem) {
  return std::filesystem::temp_directory_path() / stem;
}

}  // namespace

TEST_CASE("input features stack re, im and the noise plane") {
  ModelConfig cfg = desk_config();
  RxGrids rx(2, cfg.T, cfg.F);
  Rng rng(61);
  for (auto& c : rx.cells) c = rng.cnormal(1.0);
  const double n0 = 0.37;

  Tensor x = build_input_features(rx, n0, cfg);
  REQUIRE(x.rank() == 3);
  CHECK(x.dim(0) == cfg.T);
  CHECK(x.dim(1) == cfg.F);
  CHECK(x.dim(2) == 5);
  for (int t = 0; t < cfg.T; ++t)
    for (int f = 0; f < cfg.F; ++f) {
      CHECK(x.at(t, f, 0) == rx.at(0, t, f).real());
      CHECK(x.at(t, f, 1) == rx.at(0, t, f).imag());
      CHECK(x.at(t, f, 2) == rx.at(1, t, f).real());
      CHECK(x.at(t, f, 3) == rx.at(1, t, f).imag());
      CHECK(x.at(t, f, 4) == std::log(n0));
    }
}

TEST_CASE("input features reject nonpositive noise and wrong antenna count") {
  ModelConfig cfg = desk_config();
  RxGrids rx(2, cfg.T, cfg.F);
  CHECK_THROWS_AS(build_input_features(rx, 0.0, cfg), ShapeError);
  RxGrids bad(1, cfg.T, cfg.F);
  CHECK_THROWS_AS(build_input_features(bad, 0.1, cfg), ShapeError);
}

TEST_CASE("conv layer ids cover the forward order") {
  ModelConfig cfg = desk_config();
  auto ids = cfg.conv_layer_ids();
  REQUIRE(ids.size() == 2 + 2 * 2);
  CHECK(ids.front() == "conv_in");
  CHECK(ids.back() == "conv_out");
  auto eligible = cfg.adapter_eligible_layers();
  REQUIRE(eligible.size() == 4);
  for (const auto& id : eligible) {
    CHECK(id != "conv_in");
    CHECK(id != "conv_out");
  }
  // default adapter placement: the last num_adapter_layers eligible convs
  auto resolved = cfg.resolved_adapter_layers();
  REQUIRE(resolved.size() == 2);
  CHECK(resolved[0] == eligible[2]);
  CHECK(resolved[1] == eligible[3]);
}

TEST_CASE("explicit adapter layer lists are honoured and validated") {
  ModelConfig cfg = desk_config();
  cfg.adapter_layers = {cfg.adapter_eligible_layers()[0]};
  CHECK(cfg.resolved_adapter_layers() == cfg.adapter_layers);
  cfg.adapter_layers = {"conv_in"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.adapter_layers = {"no_such_layer"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = desk_config();
  cfg.num_adapter_layers = 99;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("base init is seeded: same rng same weights") {
  ModelConfig cfg = desk_config();
  BaseWeights a = BaseWeights::init(cfg, Rng(7));
  BaseWeights b = BaseWeights::init(cfg, Rng(7));
  BaseWeights c = BaseWeights::init(cfg, Rng(8));
  CHECK(a.weight_checksum() == b.weight_checksum());
  CHECK(a.weight_checksum() != c.weight_checksum());
  // biases zero, layer norm identity
  for (int64_t i = 0; i < a.conv_in.b.value.numel(); ++i) CHECK(a.conv_in.b.value[i] == 0.0);
  for (int64_t i = 0; i < a.blocks[0].ln1.gamma.value.numel(); ++i)
    CHECK(a.blocks[0].ln1.gamma.value[i] == 1.0);
  for (int64_t i = 0; i < a.blocks[0].ln1.beta.value.numel(); ++i)
    CHECK(a.blocks[0].ln1.beta.value[i] == 0.0);
}

TEST_CASE("parameter count formula and published total") {
  // Desk scale, counted directly here from the architecture.
  ModelConfig cfg = desk_config();
  BaseWeights w = BaseWeights::init(cfg, Rng(1));
  const int64_t C = cfg.channels;
  const int64_t k = cfg.kernel;
  const int64_t grid = static_cast<int64_t>(cfg.T) * cfg.F;
  int64_t want = k * k * cfg.input_channels() * C + C;          // conv_in
  want += cfg.num_res_blocks * (2 * (2 * grid * C)              // ln gamma+beta
                                + 2 * (k * k * C * C + C));     // two convs
  want += k * k * C * cfg.bits_per_symbol + cfg.bits_per_symbol;  // conv_out
  CHECK(w.param_count() == want);

  // Production geometry lands at about 4.8M parameters.
  ModelConfig prod;
  prod.T = 14;
  prod.F = 128;
  prod.channels = 128;
  prod.num_res_blocks = 4;
  prod.num_rx = 1;
  BaseWeights pw = BaseWeights::init(prod, Rng(1));
  CHECK(pw.param_count() == 4858884);
  prod.num_rx = 2;
  BaseWeights pw2 = BaseWeights::init(prod, Rng(1));
  CHECK(pw2.param_count() == 4861188);
}

TEST_CASE("forward output shape and all-finite llrs") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(9));
  Tensor x = random_features(cfg, 62);
  Tensor y = forward_base(x, cfg, base);
  REQUIRE(y.rank() == 3);
  CHECK(y.dim(0) == cfg.T);
  CHECK(y.dim(1) == cfg.F);
  CHECK(y.dim(2) == cfg.bits_per_symbol);
  CHECK(y.all_finite());
}

TEST_CASE("zeroed conv_out silences the llr grid") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(10));
  for (int64_t i = 0; i < base.conv_out.w.value.numel(); ++i) base.conv_out.w.value[i] = 0.0;
  Tensor y = forward_base(random_features(cfg, 63), cfg, base);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("taped and untaped forward agree bitwise") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(11));
  Tensor x = random_features(cfg, 64);
  Tensor untaped = forward_base(x, cfg, base);
  Tape tape;
  Var taped = forward_net(tape, tape.input(x), cfg, base, nullptr);
  CHECK(bitwise_equal(untaped, taped->val()));
}

TEST_CASE("fresh adapters leave the forward pass bit-identical") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(12));
  AdapterRegistry reg;
  reg.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(100));
  Tensor x = random_features(cfg, 65);

  Tensor plain = forward_base(x, cfg, base);
  reg.switch_cr(500);
  Tensor adapted = forward_loren(x, cfg, base, reg);
  CHECK(bitwise_equal(plain, adapted));  // B starts at zero

  // A is random at init, B zero
  const auto& set = reg.set_for(500);
  REQUIRE(set.size() == 2);
  for (const auto& [id, ad] : set) {
    bool a_nonzero = false;
    for (int64_t i = 0; i < ad.A.value.numel(); ++i)
      a_nonzero = a_nonzero || ad.A.value[i] != 0.0;
    CHECK(a_nonzero);
    for (int64_t i = 0; i < ad.B.value.numel(); ++i) CHECK(ad.B.value[i] == 0.0);
  }
}

TEST_CASE("trained-looking adapters change the output") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(13));
  AdapterRegistry reg;
  reg.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(101));
  Rng rng(66);
  for (auto& [id, ad] : reg.set_for(500))
    for (int64_t i = 0; i < ad.B.value.numel(); ++i) ad.B.value[i] = 0.3 * rng.normal();
  Tensor x = random_features(cfg, 67);
  reg.switch_cr(500);
  CHECK_FALSE(bitwise_equal(forward_base(x, cfg, base), forward_loren(x, cfg, base, reg)));
}

TEST_CASE("merging adapters into kernels matches the adapter forward pass") {
  ModelConfig cfg = desk_config();
  Tensor x = random_features(cfg, 68);
  for (uint64_t trial = 0; trial < 20; ++trial) {
    BaseWeights base = BaseWeights::init(cfg, Rng(200 + trial));
    AdapterRegistry reg;
    reg.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(300 + trial));
    Rng rng(400 + trial);
    for (auto& [id, ad] : reg.set_for(500)) {
      for (int64_t i = 0; i < ad.B.value.numel(); ++i) ad.B.value[i] = 0.5 * rng.normal();
      for (int64_t i = 0; i < ad.A.value.numel(); ++i) ad.A.value[i] += 0.1 * rng.normal();
    }
    reg.switch_cr(500);
    Tensor adapted = forward_loren(x, cfg, base, reg);

    BaseWeights merged = BaseWeights::init(cfg, Rng(200 + trial));
    for (auto& [id, ad] : reg.set_for(500)) {
      ConvLayer* conv = merged.find_conv(id);
      REQUIRE(conv != nullptr);
      conv->w.value = merge_adapter(conv->w.value, ad);
    }
    Tensor folded = forward_base(x, cfg, merged);
    double worst = 0;
    for (int64_t i = 0; i < adapted.numel(); ++i)
      worst = std::max(worst, std::abs(adapted[i] - folded[i]));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("merge of a zero adapter returns the kernel unchanged") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(14));
  LorenAdapter ad = LorenAdapter::init(cfg.channels, cfg.channels, cfg.rank, cfg.alpha,
                                       "t", Rng(15));
  Tensor merged = merge_adapter(base.blocks[0].conv1.w.value, ad);
  CHECK(bitwise_equal(merged, base.blocks[0].conv1.w.value));
}

TEST_CASE("adapter parameters per code rate") {
  ModelConfig cfg = desk_config();
  // (Cin * r + r * Cout) per layer
  CHECK(adapter_params_per_cr(cfg) == 2 * (8 * 2 + 2 * 8));
  ModelConfig prod;
  prod.T = 14;
  prod.F = 128;
  prod.channels = 128;
  prod.num_res_blocks = 4;
  prod.rank = 4;
  prod.num_adapter_layers = 2;
  CHECK(adapter_params_per_cr(prod) == 2 * 1024);
}

TEST_CASE("switching code rates touches no tensor and is reversible") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(16));
  AdapterRegistry reg;
  reg.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(17));
  reg.register_cr(cfg, base, CodeRate::from_double(0.75), Rng(18));
  CHECK(reg.registered() == std::vector<int>{500, 750});

  const uint64_t before_sum = reg.weight_checksum();
  const uint64_t allocs_before = tensor_allocations();
  reg.switch_cr(500);
  CHECK(reg.active_cr() == 500);
  reg.switch_cr(750);
  CHECK(reg.active_cr() == 750);
  reg.switch_cr(500);
  CHECK(tensor_allocations() == allocs_before);
  CHECK(reg.weight_checksum() == before_sum);

  CHECK_THROWS_AS(reg.switch_cr(123), ConfigError);
  CHECK(reg.active_cr() == 500);
}

TEST_CASE("per-rate adapters are independent parameter sets") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(19));
  AdapterRegistry reg;
  reg.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(20));
  reg.register_cr(cfg, base, CodeRate::from_double(0.75), Rng(21));
  auto p500 = reg.params_for(500);
  auto p750 = reg.params_for(750);
  REQUIRE(p500.size() == 4);  // A and B for each of 2 layers
  for (Parameter* a : p500)
    for (Parameter* b : p750) CHECK(a != b);
  // editing one rate leaves the other untouched
  uint64_t sum_before = reg.weight_checksum();
  p500[0]->value[0] += 1.0;
  CHECK(reg.weight_checksum() != sum_before);
}

TEST_CASE("weights round-trip through the container bit for bit") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(22));
  AdapterRegistry reg;
  reg.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(23));
  reg.register_cr(cfg, base, CodeRate::from_double(667.0 / 1000.0), Rng(24));
  Rng rng(25);
  for (int cr : reg.registered())
    for (auto& [id, ad] : reg.set_for(cr))
      for (int64_t i = 0; i < ad.B.value.numel(); ++i) ad.B.value[i] = rng.normal();

  auto path = temp_file("weights_roundtrip.bin");
  save_weights(path.string(), cfg, base, &reg);
  LoadedModel loaded = load_weights(path.string(), cfg);
  CHECK(loaded.base.weight_checksum() == base.weight_checksum());
  CHECK(loaded.registry.weight_checksum() == reg.weight_checksum());
  CHECK(loaded.registry.registered() == reg.registered());

  Tensor x = random_features(cfg, 69);
  loaded.registry.switch_cr(667);
  reg.switch_cr(667);
  CHECK(bitwise_equal(forward_loren(x, cfg, base, reg),
                      forward_loren(x, cfg, loaded.base, loaded.registry)));
  std::filesystem::remove(path);
}

TEST_CASE("weight container rejects corruption and geometry mismatch") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(26));
  auto path = temp_file("weights_corrupt.bin");
  save_weights(path.string(), cfg, base);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('Z');
  }
  CHECK_THROWS_AS(load_weights(path.string(), cfg), IoError);

  save_weights(path.string(), cfg, base);
  ModelConfig other = cfg;
  other.channels = 16;
  CHECK_THROWS_AS(load_weights(path.string(), other), ConfigError);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_weights("/nonexistent/w.bin", cfg), MissingArtifactError);
}

TEST_CASE("set_trainable freezes every base parameter") {
  ModelConfig cfg = desk_config();
  BaseWeights base = BaseWeights::init(cfg, Rng(27));
  base.set_trainable(false);
  for (Parameter* p : base.params()) CHECK_FALSE(p->trainable);
  base.set_trainable(true);
  for (Parameter* p : base.params()) CHECK(p->trainable);
}
