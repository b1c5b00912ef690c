#include "loren/training.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include "loren/errors.hpp"
#include "loren/util.hpp"

namespace loren {

void Optimizer::step(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    if (cfg_.kind == OptimizerConfig::Kind::Sgd) {
      for (int64_t i = 0; i < p->value.numel(); ++i)
        p->value[i] -= cfg_.learning_rate * p->grad[i];
      continue;
    }
    Slot& slot = slots_[p->name];
    if (slot.m.numel() == 0) {
      slot.m = Tensor(p->value.shape());
      slot.v = Tensor(p->value.shape());
    }
    if (!slot.m.same_shape(p->value))
      throw ShapeError("optimizer state shape mismatch for '" + p->name + "'");
    ++slot.t;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(slot.t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(slot.t));
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad[i];
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = slot.m[i] / c1;
      const double vhat = slot.v[i] / c2;
      p->value[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Optimizer::save_state(std::vector<ContainerEntry>* out) const {
  for (const auto& [name, slot] : slots_) {
    out->push_back(ContainerEntry::tensor("opt/" + name + "/m", slot.m));
    out->push_back(ContainerEntry::tensor("opt/" + name + "/v", slot.v));
    out->push_back(ContainerEntry::scalar_u64("opt/" + name + "/t", slot.t));
  }
}

void Optimizer::load_state(const std::vector<ContainerEntry>& entries) {
  slots_.clear();
  for (const auto& e : entries) {
    if (e.name.rfind("opt/", 0) != 0) continue;
    const size_t tail = e.name.rfind('/');
    const std::string param = e.name.substr(4, tail - 4);
    const std::string field = e.name.substr(tail + 1);
    Slot& slot = slots_[param];
    if (field == "m") slot.m = Tensor::from(e.shape, e.f64);
    else if (field == "v") slot.v = Tensor::from(e.shape, e.f64);
    else if (field == "t") slot.t = e.u64.at(0);
    else throw IoError("unknown optimizer state entry '" + e.name + "'");
  }
}

std::map<int, double> TrainLog::mean_loss_per_cr() const {
  std::map<int, double> sums;
  std::map<int, int64_t> counts;
  for (const auto& e : entries) {
    sums[e.cr_milli] += e.loss;
    ++counts[e.cr_milli];
  }
  for (auto& [milli, s] : sums) s /= static_cast<double>(counts[milli]);
  return sums;
}

double TrainLog::mean_loss_last(size_t count) const {
  if (entries.empty() || count == 0) return 0.0;
  const size_t take = std::min(count, entries.size());
  double s = 0.0;
  for (size_t i = entries.size() - take; i < entries.size(); ++i) s += entries[i].loss;
  return s / static_cast<double>(take);
}

void TrainLog::write_csv(const std::string& path) const {
  std::string text = "iteration,cr,ebno_db,loss\n";
  for (const auto& e : entries) {
    text += std::to_string(e.iteration);
    text += ',';
    text += format_double(static_cast<double>(e.cr_milli) / 1000.0);
    text += ',';
    text += format_double(e.ebno_db);
    text += ',';
    text += format_double(e.loss);
    text += '\n';
  }
  write_text_file(path, text);
}

LinkContext LinkContext::make(GridSpec grid, ChannelConfig channel, int ldpc_max_iters,
                              uint64_t ldpc_seed) {
  grid.validate();
  channel.validate();
  if (ldpc_max_iters < 0) throw ConfigError("ldpc_max_iters must be nonnegative");
  LinkContext ctx;
  ctx.grid = std::move(grid);
  ctx.channel = channel;
  ctx.ldpc_max_iters = ldpc_max_iters;
  ctx.ldpc_seed = ldpc_seed;
  ctx.data_res = ctx.grid.data_re_flat();
  return ctx;
}

const LdpcCode& LinkContext::code_for(CodeRate cr) {
  std::lock_guard<std::mutex> lock(*mu_);
  auto it = codes_.find(cr.milli);
  if (it != codes_.end()) return *it->second;
  auto code = std::make_unique<LdpcCode>(
      LdpcCode::build(grid.codeword_bits(), cr.value,
                      Rng(ldpc_seed, {static_cast<uint64_t>(cr.milli)}).next_u64()));
  return *codes_.emplace(cr.milli, std::move(code)).first->second;
}

BlockSample simulate_block(LinkContext& ctx, CodeRate cr, double ebno_db, const Rng& rng) {
  const LdpcCode& code = ctx.code_for(cr);
  BlockSample s;

  Rng info_rng = rng.derive({stream::kInfoBits});
  s.info.resize(static_cast<size_t>(code.k()));
  for (auto& b : s.info) b = info_rng.bit();
  s.coded = code.encode(s.info);

  const auto symbols = ctx.qam.map(s.coded);
  const ResourceGrid tx = assemble_grid(ctx.grid, symbols);

  Rng chan_rng = rng.derive({stream::kChannel});
  s.chan = sample_channel(ctx.channel, ctx.grid.T, ctx.grid.F, chan_rng);
  s.rx = apply_channel(tx, s.chan);

  s.n0 = ebno_to_n0(ebno_db, cr.value, ctx.grid.bits_per_symbol, ctx.data_re_fraction());
  Rng noise_rng = rng.derive({stream::kNoise});
  add_awgn(s.rx, s.n0, noise_rng);
  return s;
}

double bce_llr_loss(const Tensor& llrs, const std::vector<uint8_t>& coded_bits) {
  if (llrs.numel() != static_cast<int64_t>(coded_bits.size()))
    throw ShapeError("bce_llr_loss: LLR count " + std::to_string(llrs.numel()) +
                     " does not match bit count " + std::to_string(coded_bits.size()));
  return ops::bce_with_llr(llrs, coded_bits);
}

namespace {

void validate_phase(const TrainPhaseConfig& phase, const std::vector<CodeRate>& crs) {
  if (crs.empty()) throw ConfigError("training: code rate list is empty");
  if (phase.iterations < 0) throw ConfigError("training: negative iteration count");
  if (phase.batch_size <= 0) throw ConfigError("training: batch_size must be positive");
  if (!(phase.ebno_lo_db < phase.ebno_hi_db))
    throw ConfigError("training: Eb/N0 range must satisfy lo < hi");
  if (phase.checkpoint_every < 0) throw ConfigError("training: negative checkpoint interval");
  if (phase.checkpoint_every > 0 && phase.checkpoint_path.empty())
    throw ConfigError("training: checkpoint interval set without a path");
}

struct IterDraw {
  CodeRate cr;
  double ebno_db = 0.0;
  Rng rng{0};
};

IterDraw draw_for(uint64_t seed, uint64_t phase_id, int iter, int item,
                  const std::vector<CodeRate>& crs, const TrainPhaseConfig& phase) {
  IterDraw d;
  d.rng = Rng(seed, {phase_id, static_cast<uint64_t>(iter), static_cast<uint64_t>(item)});
  d.ebno_db = d.rng.uniform(phase.ebno_lo_db, phase.ebno_hi_db);
  d.cr = crs[d.rng.below(crs.size())];
  return d;
}

double taped_loss_and_grads(const ModelConfig& cfg, LinkContext& ctx, BaseWeights& base,
                            AdapterSet* adapters, const IterDraw& d, double grad_scale,
                            int iter) {
  BlockSample block = simulate_block(ctx, d.cr, d.ebno_db, d.rng);
  Tensor feat = build_input_features(block.rx, block.n0, cfg);
  Tape tape;
  Var out = forward_net(tape, tape.input(std::move(feat)), cfg, base, adapters);
  Var rows = tape.gather_tf(out, ctx.data_res);
  Var loss = tape.bce_with_llr(rows, block.coded);
  const double value = loss->val()[0];
  if (!std::isfinite(value))
    throw DivergenceError("training loss is not finite at iteration " + std::to_string(iter));
  tape.backward(loss, grad_scale);
  return value;
}

uint64_t checkpoint_next_iter(const std::vector<ContainerEntry>& entries) {
  const ContainerEntry* e = find_entry(entries, "ckpt/next_iteration");
  if (!e || e->u64.empty()) throw IoError("checkpoint is missing its iteration counter");
  return e->u64[0];
}

void write_checkpoint(const std::string& path, uint64_t phase_id, uint64_t next_iter,
                      const ModelConfig& cfg, const BaseWeights& base,
                      const AdapterRegistry* registry, const Optimizer& opt) {
  auto entries = weight_entries(cfg, base, registry);
  opt.save_state(&entries);
  entries.push_back(ContainerEntry::scalar_u64("ckpt/phase", phase_id));
  entries.push_back(ContainerEntry::scalar_u64("ckpt/next_iteration", next_iter));
  ensure_parent_dir(path);
  save_container(path, entries);
}

}  // namespace

BaseTrainResult train_base(const ModelConfig& cfg, LinkContext& ctx,
                           const std::vector<CodeRate>& crs, const TrainPhaseConfig& phase,
                           uint64_t seed, const std::string& resume_checkpoint) {
  cfg.validate();
  validate_phase(phase, crs);
  if (cfg.T != ctx.grid.T || cfg.F != ctx.grid.F)
    throw ConfigError("training: model grid does not match link grid");

  BaseTrainResult res{BaseWeights::init(cfg, Rng(seed)), {}};
  Optimizer opt(phase.optimizer);
  int start_iter = 0;
  if (!resume_checkpoint.empty()) {
    const auto entries = load_container(resume_checkpoint);
    const ContainerEntry* ph = find_entry(entries, "ckpt/phase");
    if (!ph || ph->u64.at(0) != 1)
      throw ConfigError("checkpoint is not a base-phase checkpoint");
    fill_base_weights(entries, cfg, &res.weights);
    opt.load_state(entries);
    start_iter = static_cast<int>(checkpoint_next_iter(entries));
  }
  res.weights.set_trainable(true);

  const auto t0 = std::chrono::steady_clock::now();
  const auto params = res.weights.params();
  for (int iter = start_iter; iter < phase.iterations; ++iter) {
    for (int item = 0; item < phase.batch_size; ++item) {
      IterDraw d = draw_for(seed, stream::kTrainBase, iter, item, crs, phase);
      const double loss = taped_loss_and_grads(cfg, ctx, res.weights, nullptr, d,
                                               1.0 / phase.batch_size, iter);
      res.log.entries.push_back({iter, d.cr.milli, d.ebno_db, loss});
    }
    opt.step(params);
    res.weights.zero_grads();
    if (phase.checkpoint_every > 0 && (iter + 1) % phase.checkpoint_every == 0)
      write_checkpoint(phase.checkpoint_path, 1, static_cast<uint64_t>(iter) + 1, cfg,
                       res.weights, nullptr, opt);
  }
  res.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

AdapterTrainResult train_adapters(const ModelConfig& cfg, LinkContext& ctx,
                                  BaseWeights& base, const std::vector<CodeRate>& crs,
                                  const TrainPhaseConfig& phase, uint64_t seed,
                                  const std::string& resume_checkpoint) {
  cfg.validate();
  validate_phase(phase, crs);
  if (cfg.T != ctx.grid.T || cfg.F != ctx.grid.F)
    throw ConfigError("training: model grid does not match link grid");

  base.set_trainable(false);
  base.zero_grads();

  AdapterTrainResult res;
  for (const CodeRate& cr : crs) res.registry.register_cr(cfg, base, cr, Rng(seed));
  Optimizer opt(phase.optimizer);
  int start_iter = 0;
  if (!resume_checkpoint.empty()) {
    const auto entries = load_container(resume_checkpoint);
    const ContainerEntry* ph = find_entry(entries, "ckpt/phase");
    if (!ph || ph->u64.at(0) != 2)
      throw ConfigError("checkpoint is not an adapter-phase checkpoint");
    fill_base_weights(entries, cfg, &base);
    res.registry = AdapterRegistry();
    fill_registry(entries, cfg, base, &res.registry);
    opt.load_state(entries);
    start_iter = static_cast<int>(checkpoint_next_iter(entries));
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (int iter = start_iter; iter < phase.iterations; ++iter) {
    std::set<int> used;
    for (int item = 0; item < phase.batch_size; ++item) {
      IterDraw d = draw_for(seed, stream::kTrainAdapters, iter, item, crs, phase);
      res.registry.switch_cr(d.cr.milli);
      used.insert(d.cr.milli);
      const double loss =
          taped_loss_and_grads(cfg, ctx, base, &res.registry.active_set(), d,
                               1.0 / phase.batch_size, iter);
      res.log.entries.push_back({iter, d.cr.milli, d.ebno_db, loss});
    }
    for (int milli : used) {
      const auto params = res.registry.params_for(milli);
      opt.step(params);
      for (Parameter* p : params) p->zero_grad();
    }
    if (phase.checkpoint_every > 0 && (iter + 1) % phase.checkpoint_every == 0)
      write_checkpoint(phase.checkpoint_path, 2, static_cast<uint64_t>(iter) + 1, cfg, base,
                       &res.registry, opt);
  }
  res.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

double evaluate_loss(const ModelConfig& cfg, LinkContext& ctx, BaseWeights& base,
                     AdapterRegistry* registry, CodeRate cr, int num_blocks,
                     double ebno_lo_db, double ebno_hi_db, uint64_t seed) {
  if (num_blocks <= 0) throw ConfigError("evaluate_loss: need at least one block");
  if (registry) registry->switch_cr(cr.milli);
  double total = 0.0;
  for (int i = 0; i < num_blocks; ++i) {
    Rng rng(seed, {stream::kHeldout, static_cast<uint64_t>(cr.milli),
                   static_cast<uint64_t>(i)});
    const double ebno = rng.uniform(ebno_lo_db, ebno_hi_db);
    BlockSample block = simulate_block(ctx, cr, ebno, rng);
    const Tensor feat = build_input_features(block.rx, block.n0, cfg);
    const Tensor out = registry ? forward_loren(feat, cfg, base, *registry)
                                : forward_base(feat, cfg, base);
    const Tensor rows = ops::gather_tf(out, ctx.data_res);
    total += bce_llr_loss(rows, block.coded);
  }
  return total / num_blocks;
}

}  // namespace loren
