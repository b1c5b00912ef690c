#include "loren/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "loren/errors.hpp"
#include "loren/evaluation.hpp"

namespace loren {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail(path, "expected an integer");
  return static_cast<int>(v.get<int64_t>());
}

int64_t as_int64(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail(path, "expected an integer");
  return v.get<int64_t>();
}

uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  if (v.is_number_integer() && v.get<int64_t>() >= 0)
    return static_cast<uint64_t>(v.get<int64_t>());
  fail(path, "expected a non-negative integer");
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_str(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

const json& as_obj(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  return v;
}

const json& as_arr(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

std::vector<int> int_list(const json& v, const std::string& path) {
  std::vector<int> out;
  for (size_t i = 0; i < as_arr(v, path).size(); ++i)
    out.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<double> double_list(const json& v, const std::string& path) {
  std::vector<double> out;
  for (size_t i = 0; i < as_arr(v, path).size(); ++i)
    out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
  std::vector<std::string> out;
  for (size_t i = 0; i < as_arr(v, path).size(); ++i)
    out.push_back(as_str(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void parse_link(const json& j, const std::string& p, LinkSettings* link) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "T") link->T = as_int(v, kp);
    else if (key == "F") link->F = as_int(v, kp);
    else if (key == "pilot_symbols") link->pilot_symbols = int_list(v, kp);
    else if (key == "pilot_seed") link->pilot_seed = as_u64(v, kp);
    else if (key == "bits_per_symbol") link->bits_per_symbol = as_int(v, kp);
    else if (key == "ldpc_max_iters") link->ldpc_max_iters = as_int(v, kp);
    else if (key == "ldpc_seed") link->ldpc_seed = as_u64(v, kp);
    else fail(kp, "unknown field");
  }
}

void parse_channel(const json& j, const std::string& p, ChannelConfig* ch) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "num_rx") ch->num_rx = as_int(v, kp);
    else if (key == "doppler") {
      const std::string s = as_str(v, kp);
      if (s == "block") ch->doppler = DopplerModel::BlockConstant;
      else if (s == "ar1") ch->doppler = DopplerModel::PerSymbolAr1;
      else fail(kp, "expected \"block\" or \"ar1\"");
    } else if (key == "ar1_rho") ch->ar1_rho = as_double(v, kp);
    else if (key == "pdp") {
      ch->pdp.clear();
      const json& arr = as_arr(v, kp);
      for (size_t i = 0; i < arr.size(); ++i) {
        const std::string tp = kp + "[" + std::to_string(i) + "]";
        PdpTap tap;
        for (const auto& [tk, tv] : as_obj(arr[i], tp).items()) {
          const std::string tkp = tp + "." + tk;
          if (tk == "delay_samples") tap.delay_samples = as_int(tv, tkp);
          else if (tk == "power_db") tap.power_db = as_double(tv, tkp);
          else fail(tkp, "unknown field");
        }
        ch->pdp.push_back(tap);
      }
    } else fail(kp, "unknown field");
  }
}

void parse_model(const json& j, const std::string& p, ModelConfig* m) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "channels") m->channels = as_int(v, kp);
    else if (key == "num_res_blocks") m->num_res_blocks = as_int(v, kp);
    else if (key == "kernel") m->kernel = as_int(v, kp);
    else if (key == "ln_eps") m->ln_eps = as_double(v, kp);
    else if (key == "rank") m->rank = as_int(v, kp);
    else if (key == "alpha") m->alpha = as_double(v, kp);
    else if (key == "num_adapter_layers") m->num_adapter_layers = as_int(v, kp);
    else if (key == "adapter_layers") m->adapter_layers = string_list(v, kp);
    else fail(kp, "unknown field");
  }
}

void parse_optimizer(const json& j, const std::string& p, OptimizerConfig* opt) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "kind") {
      const std::string s = as_str(v, kp);
      if (s == "sgd") opt->kind = OptimizerConfig::Kind::Sgd;
      else if (s == "adam") opt->kind = OptimizerConfig::Kind::Adam;
      else fail(kp, "expected \"sgd\" or \"adam\"");
    } else if (key == "learning_rate") opt->learning_rate = as_double(v, kp);
    else if (key == "beta1") opt->beta1 = as_double(v, kp);
    else if (key == "beta2") opt->beta2 = as_double(v, kp);
    else if (key == "eps") opt->eps = as_double(v, kp);
    else fail(kp, "unknown field");
  }
}

void parse_train(const json& j, const std::string& p, TrainPhaseConfig* t) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "iterations") t->iterations = as_int(v, kp);
    else if (key == "batch_size") t->batch_size = as_int(v, kp);
    else if (key == "ebno_range_db") {
      auto range = double_list(v, kp);
      if (range.size() != 2) fail(kp, "expected [lo, hi]");
      t->ebno_lo_db = range[0];
      t->ebno_hi_db = range[1];
    } else if (key == "optimizer") parse_optimizer(v, kp, &t->optimizer);
    else if (key == "checkpoint_every") t->checkpoint_every = as_int(v, kp);
    else if (key == "checkpoint_path") t->checkpoint_path = as_str(v, kp);
    else fail(kp, "unknown field");
  }
}

void parse_eval(const json& j, const std::string& p, EvalSettings* e) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "receivers") e->receivers = string_list(v, kp);
    else if (key == "ebno_points_db") e->ebno_points_db = double_list(v, kp);
    else if (key == "min_block_errors") e->min_block_errors = as_int(v, kp);
    else if (key == "max_blocks") e->max_blocks = as_int64(v, kp);
    else fail(kp, "unknown field");
  }
}

void parse_hwcost(const json& j, const std::string& p, hwcost::CostConfig* hw) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "channels") hw->dims.channels = as_int(v, kp);
    else if (key == "num_res_blocks") hw->dims.num_res_blocks = as_int(v, kp);
    else if (key == "kernel") hw->dims.kernel = as_int(v, kp);
    else if (key == "input_channels") hw->dims.input_channels = as_int(v, kp);
    else if (key == "output_channels") hw->dims.output_channels = as_int(v, kp);
    else if (key == "T") hw->dims.T = as_int(v, kp);
    else if (key == "F") hw->dims.F = as_int(v, kp);
    else if (key == "quant_bits") hw->quant_bits = as_int(v, kp);
    else if (key == "n_code_rates") hw->n_code_rates = as_int(v, kp);
    else if (key == "adapter_rank") hw->adapter_rank = as_int(v, kp);
    else if (key == "num_adapter_layers") hw->num_adapter_layers = as_int(v, kp);
    else if (key == "access_ns") hw->access_ns = as_double(v, kp);
    else if (key == "clock_mhz") hw->clock_mhz = as_double(v, kp);
    else if (key == "voltage") hw->voltage = as_str(v, kp);
    else if (key == "subframe_ms") hw->subframe_ms = as_double(v, kp);
    else if (key == "sequential_load") hw->sequential_load = as_bool(v, kp);
    else if (key == "datasheet") {
      hw->datasheet.clear();
      for (const auto& [kind, dv] : as_obj(v, kp).items()) {
        const std::string dp = kp + "." + kind;
        hwcost::SramDatasheet sheet;
        for (const auto& [dk, dvv] : as_obj(dv, dp).items()) {
          const std::string dkp = dp + "." + dk;
          if (dk == "read_energy_pj_per_word")
            sheet.read_energy_pj_per_word = as_double(dvv, dkp);
          else if (dk == "leakage_mw") sheet.leakage_mw = as_double(dvv, dkp);
          else if (dk == "area_um2") sheet.area_um2 = as_double(dvv, dkp);
          else fail(dkp, "unknown field");
        }
        hw->datasheet[kind] = sheet;
      }
    } else fail(kp, "unknown field");
  }
}

void parse_paths(const json& j, const std::string& p, PathsSettings* paths) {
  for (const auto& [key, v] : as_obj(j, p).items()) {
    const std::string kp = p + "." + key;
    if (key == "out_dir") paths->out_dir = as_str(v, kp);
    else if (key == "base_weights") paths->base_weights = as_str(v, kp);
    else if (key == "loren_weights") paths->loren_weights = as_str(v, kp);
    else fail(kp, "unknown field");
  }
}

// Fields the model and cost sections share with link/channel are mirrored,
// never duplicated in the file.
void mirror_shared_fields(GlobalConfig* cfg) {
  cfg->model.T = cfg->link.T;
  cfg->model.F = cfg->link.F;
  cfg->model.num_rx = cfg->channel.num_rx;
  cfg->model.bits_per_symbol = cfg->link.bits_per_symbol;
}

json optimizer_json(const OptimizerConfig& opt) {
  json j;
  j["kind"] = opt.kind == OptimizerConfig::Kind::Sgd ? "sgd" : "adam";
  j["learning_rate"] = opt.learning_rate;
  j["beta1"] = opt.beta1;
  j["beta2"] = opt.beta2;
  j["eps"] = opt.eps;
  return j;
}

json train_json(const TrainPhaseConfig& t) {
  json j;
  j["iterations"] = t.iterations;
  j["batch_size"] = t.batch_size;
  j["ebno_range_db"] = {t.ebno_lo_db, t.ebno_hi_db};
  j["optimizer"] = optimizer_json(t.optimizer);
  j["checkpoint_every"] = t.checkpoint_every;
  j["checkpoint_path"] = t.checkpoint_path;
  return j;
}

}  // namespace

GlobalConfig GlobalConfig::defaults() {
  GlobalConfig cfg;
  mirror_shared_fields(&cfg);
  return cfg;
}

GlobalConfig GlobalConfig::from_json_text(const std::string& text,
                                          const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + origin + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: " + origin + ": expected an object");

  GlobalConfig cfg;
  for (const auto& [key, v] : root.items()) {
    if (key == "schema_version") cfg.schema_version = as_int(v, key);
    else if (key == "seed") cfg.seed = as_u64(v, key);
    else if (key == "link") parse_link(v, key, &cfg.link);
    else if (key == "channel") parse_channel(v, key, &cfg.channel);
    else if (key == "model") parse_model(v, key, &cfg.model);
    else if (key == "code_rates") cfg.code_rates = double_list(v, key);
    else if (key == "train_base") parse_train(v, key, &cfg.train_base);
    else if (key == "train_adapters") parse_train(v, key, &cfg.train_adapters);
    else if (key == "eval") parse_eval(v, key, &cfg.eval);
    else if (key == "hwcost") parse_hwcost(v, key, &cfg.hw);
    else if (key == "paths") parse_paths(v, key, &cfg.paths);
    else fail(key, "unknown field");
  }
  mirror_shared_fields(&cfg);
  cfg.validate();
  return cfg;
}

GlobalConfig GlobalConfig::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path);
}

std::string GlobalConfig::to_json_text() const {
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;

  json jl;
  jl["T"] = link.T;
  jl["F"] = link.F;
  jl["pilot_symbols"] = link.pilot_symbols;
  jl["pilot_seed"] = link.pilot_seed;
  jl["bits_per_symbol"] = link.bits_per_symbol;
  jl["ldpc_max_iters"] = link.ldpc_max_iters;
  jl["ldpc_seed"] = link.ldpc_seed;
  j["link"] = jl;

  json jc;
  jc["num_rx"] = channel.num_rx;
  jc["doppler"] = channel.doppler == DopplerModel::BlockConstant ? "block" : "ar1";
  jc["ar1_rho"] = channel.ar1_rho;
  json taps = json::array();
  for (const auto& tap : channel.pdp) {
    json jt;
    jt["delay_samples"] = tap.delay_samples;
    jt["power_db"] = tap.power_db;
    taps.push_back(jt);
  }
  jc["pdp"] = taps;
  j["channel"] = jc;

  json jm;
  jm["channels"] = model.channels;
  jm["num_res_blocks"] = model.num_res_blocks;
  jm["kernel"] = model.kernel;
  jm["ln_eps"] = model.ln_eps;
  jm["rank"] = model.rank;
  jm["alpha"] = model.alpha;
  jm["num_adapter_layers"] = model.num_adapter_layers;
  jm["adapter_layers"] = model.adapter_layers;
  j["model"] = jm;

  j["code_rates"] = code_rates;
  j["train_base"] = train_json(train_base);
  j["train_adapters"] = train_json(train_adapters);

  json je;
  je["receivers"] = eval.receivers;
  je["ebno_points_db"] = eval.ebno_points_db;
  je["min_block_errors"] = eval.min_block_errors;
  je["max_blocks"] = eval.max_blocks;
  j["eval"] = je;

  json jh;
  jh["channels"] = hw.dims.channels;
  jh["num_res_blocks"] = hw.dims.num_res_blocks;
  jh["kernel"] = hw.dims.kernel;
  jh["input_channels"] = hw.dims.input_channels;
  jh["output_channels"] = hw.dims.output_channels;
  jh["T"] = hw.dims.T;
  jh["F"] = hw.dims.F;
  jh["quant_bits"] = hw.quant_bits;
  jh["n_code_rates"] = hw.n_code_rates;
  jh["adapter_rank"] = hw.adapter_rank;
  jh["num_adapter_layers"] = hw.num_adapter_layers;
  jh["access_ns"] = hw.access_ns;
  jh["clock_mhz"] = hw.clock_mhz;
  jh["voltage"] = hw.voltage;
  jh["subframe_ms"] = hw.subframe_ms;
  jh["sequential_load"] = hw.sequential_load;
  json sheets;
  for (const auto& [kind, sheet] : hw.datasheet) {
    json js;
    js["read_energy_pj_per_word"] = sheet.read_energy_pj_per_word;
    js["leakage_mw"] = sheet.leakage_mw;
    js["area_um2"] = sheet.area_um2;
    sheets[kind] = js;
  }
  jh["datasheet"] = sheets.is_null() ? json::object() : sheets;
  j["hwcost"] = jh;

  json jp;
  jp["out_dir"] = paths.out_dir;
  jp["base_weights"] = paths.base_weights;
  jp["loren_weights"] = paths.loren_weights;
  j["paths"] = jp;

  return j.dump(2) + "\n";
}

void GlobalConfig::validate() const {
  if (schema_version != 1)
    throw ConfigError("config: schema_version: expected 1, got " +
                      std::to_string(schema_version));
  if (link.bits_per_symbol != 4)
    throw ConfigError("config: link.bits_per_symbol: only 16-QAM (4) is supported");
  if (link.ldpc_max_iters <= 0)
    throw ConfigError("config: link.ldpc_max_iters: must be positive");
  grid_spec().validate();
  channel.validate();
  model.validate();
  hw.validate();

  if (code_rates.empty()) throw ConfigError("config: code_rates: must be nonempty");
  for (double r : code_rates) CodeRate::from_double(r);

  auto check_phase = [](const TrainPhaseConfig& t, const std::string& p) {
    if (t.iterations <= 0) fail(p + ".iterations", "must be positive");
    if (t.batch_size <= 0) fail(p + ".batch_size", "must be positive");
    if (!(t.ebno_lo_db < t.ebno_hi_db)) fail(p + ".ebno_range_db", "needs lo < hi");
    if (t.optimizer.learning_rate < 0) fail(p + ".optimizer.learning_rate", "negative");
    if (t.optimizer.beta1 < 0 || t.optimizer.beta1 >= 1 || t.optimizer.beta2 < 0 ||
        t.optimizer.beta2 >= 1)
      fail(p + ".optimizer", "betas must lie in [0, 1)");
    if (!(t.optimizer.eps > 0)) fail(p + ".optimizer.eps", "must be positive");
    if (t.checkpoint_every < 0) fail(p + ".checkpoint_every", "negative");
  };
  check_phase(train_base, "train_base");
  check_phase(train_adapters, "train_adapters");

  if (eval.receivers.empty()) throw ConfigError("config: eval.receivers: must be nonempty");
  for (const auto& label : eval.receivers) receiver_from_label(label);
  if (eval.ebno_points_db.empty())
    throw ConfigError("config: eval.ebno_points_db: must be nonempty");
  if (eval.min_block_errors < 1)
    throw ConfigError("config: eval.min_block_errors: must be at least 1");
  if (eval.max_blocks < eval.min_block_errors)
    throw ConfigError("config: eval.max_blocks: must cover min_block_errors");
}

std::vector<CodeRate> GlobalConfig::cr_list() const {
  std::vector<CodeRate> out;
  for (double r : code_rates) out.push_back(CodeRate::from_double(r));
  return out;
}

GridSpec GlobalConfig::grid_spec() const {
  GridSpec spec;
  spec.T = link.T;
  spec.F = link.F;
  spec.bits_per_symbol = link.bits_per_symbol;
  spec.pilots = PilotPattern::qpsk(link.pilot_symbols, link.F, link.pilot_seed);
  return spec;
}

std::string GlobalConfig::resolve_path(const std::string& name) const {
  if (name.empty() || name.front() == '/') return name;
  if (paths.out_dir.empty()) return name;
  return paths.out_dir + "/" + name;
}

}  // namespace loren
