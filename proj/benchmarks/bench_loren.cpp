#include <benchmark/benchmark.h>

#include "loren/baseline.hpp"
#include "loren/config.hpp"
#include "loren/ldpc.hpp"
#include "loren/receiver.hpp"
#include "loren/training.hpp"

using namespace loren;

namespace {

ModelConfig model_with_channels(int channels) {
  ModelConfig cfg = GlobalConfig::defaults().model;
  cfg.channels = channels;
  return cfg;
}

LinkContext production_link() {
  GlobalConfig cfg = GlobalConfig::defaults();
  return LinkContext::make(cfg.grid_spec(), cfg.channel, cfg.link.ldpc_max_iters,
                           cfg.link.ldpc_seed);
}

BlockSample sample_block(LinkContext& ctx, double ebno_db) {
  return simulate_block(ctx, CodeRate::from_double(0.5), ebno_db, Rng(31, {1}));
}

}  // namespace

static void BM_ForwardBase(benchmark::State& state) {
  ModelConfig cfg = model_with_channels(static_cast<int>(state.range(0)));
  BaseWeights base = BaseWeights::init(cfg, Rng(1));
  LinkContext ctx = production_link();
  BlockSample block = sample_block(ctx, 6.0);
  Tensor features = build_input_features(block.rx, block.n0, cfg);
  for (auto _ : state) {
    Tensor llrs = forward_base(features, cfg, base);
    benchmark::DoNotOptimize(llrs.data());
  }
}
BENCHMARK(BM_ForwardBase)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_ForwardWithAdapters(benchmark::State& state) {
  ModelConfig cfg = model_with_channels(static_cast<int>(state.range(0)));
  BaseWeights base = BaseWeights::init(cfg, Rng(1));
  AdapterRegistry registry;
  registry.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(2));
  registry.switch_cr(500);
  LinkContext ctx = production_link();
  BlockSample block = sample_block(ctx, 6.0);
  Tensor features = build_input_features(block.rx, block.n0, cfg);
  for (auto _ : state) {
    Tensor llrs = forward_loren(features, cfg, base, registry);
    benchmark::DoNotOptimize(llrs.data());
  }
}
BENCHMARK(BM_ForwardWithAdapters)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_MergeAdapter(benchmark::State& state) {
  ModelConfig cfg = model_with_channels(128);
  BaseWeights base = BaseWeights::init(cfg, Rng(1));
  LorenAdapter adapter =
      LorenAdapter::init(cfg.channels, cfg.channels, cfg.rank, cfg.alpha, "bench", Rng(3));
  const Tensor& w0 = base.blocks.back().conv2.w.value;
  for (auto _ : state) {
    Tensor merged = merge_adapter(w0, adapter);
    benchmark::DoNotOptimize(merged.data());
  }
}
BENCHMARK(BM_MergeAdapter);

static void BM_SwitchCodeRate(benchmark::State& state) {
  ModelConfig cfg = model_with_channels(128);
  BaseWeights base = BaseWeights::init(cfg, Rng(1));
  AdapterRegistry registry;
  registry.register_cr(cfg, base, CodeRate::from_double(0.5), Rng(2));
  registry.register_cr(cfg, base, CodeRate::from_double(0.75), Rng(3));
  int flip = 0;
  for (auto _ : state) {
    registry.switch_cr(flip ? 500 : 750);
    flip ^= 1;
    benchmark::DoNotOptimize(registry.active_cr());
  }
}
BENCHMARK(BM_SwitchCodeRate);

static void BM_LdpcBuild(benchmark::State& state) {
  for (auto _ : state) {
    LdpcCode code = LdpcCode::build(6144, 0.5, 7);
    benchmark::DoNotOptimize(code.k());
  }
}
BENCHMARK(BM_LdpcBuild)->Unit(benchmark::kMillisecond);

static void BM_LdpcEncode(benchmark::State& state) {
  LdpcCode code = LdpcCode::build(6144, 0.5, 7);
  Rng rng(5);
  std::vector<uint8_t> info(static_cast<size_t>(code.k()));
  for (auto& b : info) b = static_cast<uint8_t>(rng.next_u64() & 1);
  for (auto _ : state) {
    auto cw = code.encode(info);
    benchmark::DoNotOptimize(cw.data());
  }
}
BENCHMARK(BM_LdpcEncode)->Unit(benchmark::kMicrosecond);

static void BM_LdpcDecode(benchmark::State& state) {
  LdpcCode code = LdpcCode::build(6144, 0.5, 7);
  Rng rng(5);
  std::vector<uint8_t> info(static_cast<size_t>(code.k()));
  for (auto& b : info) b = static_cast<uint8_t>(rng.next_u64() & 1);
  const auto cw = code.encode(info);
  // weak llrs plus a few hard flips so the decoder actually iterates
  std::vector<double> llrs(cw.size());
  for (size_t i = 0; i < cw.size(); ++i) llrs[i] = cw[i] ? -2.0 : 2.0;
  for (size_t i = 0; i < llrs.size(); i += 200) llrs[i] = -llrs[i];
  for (auto _ : state) {
    auto dec = code.decode_bp(llrs, 20);
    benchmark::DoNotOptimize(dec.bits.data());
  }
}
BENCHMARK(BM_LdpcDecode)->Unit(benchmark::kMillisecond);

static void BM_SimulateBlock(benchmark::State& state) {
  LinkContext ctx = production_link();
  ctx.code_for(CodeRate::from_double(0.5));  // build outside the loop
  uint64_t item = 0;
  for (auto _ : state) {
    BlockSample s = simulate_block(ctx, CodeRate::from_double(0.5), 6.0, Rng(31, {item++}));
    benchmark::DoNotOptimize(s.rx.cells.data());
  }
}
BENCHMARK(BM_SimulateBlock)->Unit(benchmark::kMicrosecond);

static void BM_LsMrcReceiver(benchmark::State& state) {
  LinkContext ctx = production_link();
  BlockSample block = sample_block(ctx, 6.0);
  for (auto _ : state) {
    CsiEstimate csi = ls_estimate(block.rx, ctx.grid);
    MrcResult res = mrc_demap(block.rx, csi, ctx.grid, ctx.qam, block.n0);
    benchmark::DoNotOptimize(res.llrs.data());
  }
}
BENCHMARK(BM_LsMrcReceiver)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
