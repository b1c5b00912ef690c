// Command-line front end: code checks, the two training phases, BLER sweeps,
// the hardware cost report and CSV-to-SVG plotting, all driven by one JSON
// config. Exit codes: 0 ok, 2 bad config or usage, 3 missing input artifact,
// 4 training divergence, 5 I/O failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loren/config.hpp"
#include "loren/errors.hpp"
#include "loren/evaluation.hpp"
#include "loren/hwcost.hpp"
#include "loren/ldpc.hpp"
#include "loren/svgplot.hpp"
#include "loren/training.hpp"
#include "loren/util.hpp"
#include "loren/weights_io.hpp"

namespace {

using namespace loren;

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::is_regular_file(path, ec);
}

void echo_config(const GlobalConfig& cfg) {
  write_text_file(cfg.resolve_path("effective_config.json"), cfg.to_json_text());
}

LinkContext make_context(const GlobalConfig& cfg) {
  return LinkContext::make(cfg.grid_spec(), cfg.channel, cfg.link.ldpc_max_iters,
                           cfg.link.ldpc_seed);
}

// checkpoint_path from the config is taken relative to the output directory.
TrainPhaseConfig resolved_phase(const GlobalConfig& cfg, const TrainPhaseConfig& phase) {
  TrainPhaseConfig out = phase;
  if (!out.checkpoint_path.empty()) out.checkpoint_path = cfg.resolve_path(out.checkpoint_path);
  return out;
}

int cmd_ldpc_check(const GlobalConfig& cfg) {
  LinkContext ctx = make_context(cfg);
  std::cout << "cr,n,k,rate,checks,dropped_rows,encode,decode\n";
  for (CodeRate cr : cfg.cr_list()) {
    const LdpcCode& code = ctx.code_for(cr);

    Rng rng(cfg.seed, {0x1d9c, static_cast<uint64_t>(cr.milli)});
    std::vector<uint8_t> info(static_cast<size_t>(code.k()));
    for (auto& b : info) b = static_cast<uint8_t>(rng.next_u64() & 1);
    const auto cw = code.encode(info);
    bool encode_ok = code.syndrome_ok(cw);
    for (int i = 0; i < code.k(); ++i) encode_ok = encode_ok && cw[i] == info[i];

    std::vector<double> llrs(cw.size());
    for (size_t i = 0; i < cw.size(); ++i) llrs[i] = cw[i] ? -8.0 : 8.0;
    const auto dec = code.decode_bp(llrs, cfg.link.ldpc_max_iters);
    const bool decode_ok = dec.converged && dec.bits == cw;

    std::cout << format_double(cr.display()) << ',' << code.n() << ',' << code.k() << ','
              << format_double(code.rate()) << ',' << code.num_checks() << ','
              << code.rank_adjustment() << ',' << (encode_ok ? "ok" : "FAIL") << ','
              << (decode_ok ? "ok" : "FAIL") << '\n';
    if (!encode_ok || !decode_ok)
      throw DivergenceError("ldpc-check: code invariants failed at rate " +
                            format_double(cr.display()));
  }
  return 0;
}

int cmd_train_base(const GlobalConfig& cfg, const std::string& resume) {
  echo_config(cfg);
  LinkContext ctx = make_context(cfg);
  auto result = train_base(cfg.model, ctx, cfg.cr_list(), resolved_phase(cfg, cfg.train_base),
                           cfg.seed, resume);
  const std::string weights_path = cfg.resolve_path(cfg.paths.base_weights);
  save_weights(weights_path, cfg.model, result.weights);
  result.log.write_csv(cfg.resolve_path("train_base_log.csv"));
  std::cout << "trained base network: " << result.log.entries.size() << " iterations, "
            << "mean loss over last 100: "
            << format_double(result.log.mean_loss_last(100)) << "\n"
            << "weights: " << weights_path << "\n";
  return 0;
}

int cmd_train_adapters(const GlobalConfig& cfg, const std::string& resume,
                       const std::string& base_override) {
  echo_config(cfg);
  const std::string base_path =
      base_override.empty() ? cfg.resolve_path(cfg.paths.base_weights) : base_override;
  if (!file_exists(base_path))
    throw MissingArtifactError("train-adapters: base weights not found: " + base_path);

  LinkContext ctx = make_context(cfg);
  LoadedModel lm = load_weights(base_path, cfg.model);
  auto result = train_adapters(cfg.model, ctx, lm.base, cfg.cr_list(),
                               resolved_phase(cfg, cfg.train_adapters), cfg.seed, resume);
  const std::string weights_path = cfg.resolve_path(cfg.paths.loren_weights);
  save_weights(weights_path, cfg.model, lm.base, &result.registry);
  result.log.write_csv(cfg.resolve_path("train_adapters_log.csv"));

  std::cout << "trained adapters for";
  for (int milli : result.registry.registered())
    std::cout << ' ' << format_double(milli / 1000.0);
  std::cout << ": " << result.log.entries.size() << " iterations\n"
            << "weights: " << weights_path << "\n";
  return 0;
}

int cmd_eval(const GlobalConfig& cfg, int workers, const std::string& weights_override) {
  echo_config(cfg);

  std::vector<ReceiverKind> kinds;
  bool needs_neural = false, needs_adapters = false;
  for (const auto& label : cfg.eval.receivers) {
    const ReceiverKind kind = receiver_from_label(label);
    kinds.push_back(kind);
    needs_neural = needs_neural || kind == ReceiverKind::NeuralBase || kind == ReceiverKind::Loren;
    needs_adapters = needs_adapters || kind == ReceiverKind::Loren;
  }

  std::optional<LoadedModel> lm;
  NeuralReceiverSet neural;
  if (needs_neural) {
    std::string path = weights_override;
    if (path.empty()) {
      const std::string loren_path = cfg.resolve_path(cfg.paths.loren_weights);
      const std::string base_path = cfg.resolve_path(cfg.paths.base_weights);
      path = needs_adapters ? loren_path : (file_exists(loren_path) ? loren_path : base_path);
    }
    if (!file_exists(path)) throw MissingArtifactError("eval: weights not found: " + path);
    lm.emplace(load_weights(path, cfg.model));
    neural.cfg = &cfg.model;
    neural.base = &lm->base;
    neural.registry = &lm->registry;
    if (needs_adapters)
      for (CodeRate cr : cfg.cr_list())
        if (!lm->registry.has(cr.milli))
          throw MissingArtifactError("eval: " + path + " has no adapters for rate " +
                                     format_double(cr.display()));
  }

  LinkContext ctx = make_context(cfg);
  SweepConfig sc;
  sc.receivers = kinds;
  sc.crs = cfg.cr_list();
  sc.ebno_points_db = cfg.eval.ebno_points_db;
  sc.stop = {cfg.eval.min_block_errors, cfg.eval.max_blocks};
  sc.seed = cfg.seed;
  sc.workers = workers;
  const auto points = sweep(ctx, neural, sc);

  const std::string csv_path = cfg.resolve_path("bler.csv");
  write_bler_csv(csv_path, points);
  const auto report = compare_report(points);
  write_text_file(cfg.resolve_path("compare.txt"), report.render());

  std::cout << points.size() << " BLER points -> " << csv_path << "\n";
  return 0;
}

int cmd_hwcost(const GlobalConfig& cfg) {
  echo_config(cfg);
  const auto report = hwcost::build_report(cfg.hw);
  const std::string text = report.render_text();
  write_text_file(cfg.resolve_path("hwcost_report.txt"), text);
  write_text_file(cfg.resolve_path("hwcost_srams.csv"), report.srams_csv());
  write_text_file(cfg.resolve_path("hwcost_storage.csv"), report.storage_csv());
  std::cout << text;
  return 0;
}

int cmd_plot(const GlobalConfig& cfg, std::string bler_csv, std::vector<std::string> loss_csvs) {
  const bool explicit_bler = !bler_csv.empty();
  if (!explicit_bler) bler_csv = cfg.resolve_path("bler.csv");
  const bool explicit_loss = !loss_csvs.empty();
  if (!explicit_loss)
    loss_csvs = {cfg.resolve_path("train_base_log.csv"),
                 cfg.resolve_path("train_adapters_log.csv")};

  int emitted = 0;
  if (file_exists(bler_csv)) {
    for (const auto& plot : bler_plots_from_csv(read_text_file(bler_csv))) {
      const std::string path =
          cfg.resolve_path("bler_cr" + std::to_string(plot.cr_milli) + ".svg");
      write_text_file(path, plot.svg);
      std::cout << path << "\n";
      ++emitted;
    }
  } else if (explicit_bler) {
    throw MissingArtifactError("plot: CSV not found: " + bler_csv);
  }

  for (const auto& csv : loss_csvs) {
    if (!file_exists(csv)) {
      if (explicit_loss) throw MissingArtifactError("plot: CSV not found: " + csv);
      continue;
    }
    const std::string stem = std::filesystem::path(csv).stem().string();
    const std::string path = cfg.resolve_path(stem + ".svg");
    write_text_file(path, loss_plot_from_csv(read_text_file(csv)));
    std::cout << path << "\n";
    ++emitted;
  }

  if (emitted == 0)
    throw MissingArtifactError("plot: no CSV found under " +
                               (cfg.paths.out_dir.empty() ? std::string(".") : cfg.paths.out_dir));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"link simulator with a code-rate adaptive neural receiver"};
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir;
  uint64_t seed = 0;
  int workers = 1;
  bool print_defaults = false;
  app.add_option("--config", config_path, "JSON config file (defaults when omitted)");
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workers", workers, "evaluation worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (overrides paths.out_dir)");
  app.add_flag("--print-defaults", print_defaults, "print the default config and exit");

  auto* ldpc_cmd = app.add_subcommand("ldpc-check", "build each code and check invariants");
  auto* train_base_cmd = app.add_subcommand("train-base", "train the base network");
  std::string base_resume;
  train_base_cmd->add_option("--resume", base_resume, "checkpoint to resume from");
  auto* train_adapters_cmd =
      app.add_subcommand("train-adapters", "train per-code-rate adapters on a frozen base");
  std::string adapters_resume, base_weights_override;
  train_adapters_cmd->add_option("--resume", adapters_resume, "checkpoint to resume from");
  train_adapters_cmd->add_option("--base-weights", base_weights_override,
                                 "base weight container (default from paths)");
  auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo BLER sweep");
  std::string weights_override;
  eval_cmd->add_option("--weights", weights_override,
                       "weight container (default from paths)");
  auto* hwcost_cmd = app.add_subcommand("hwcost", "SRAM, latency and storage report");
  auto* plot_cmd = app.add_subcommand("plot", "render CSVs to SVG charts");
  std::string bler_csv;
  std::vector<std::string> loss_csvs;
  plot_cmd->add_option("--bler", bler_csv, "BLER CSV to plot");
  plot_cmd->add_option("--loss", loss_csvs, "training log CSV to plot (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (print_defaults) {
      std::cout << GlobalConfig::defaults().to_json_text();
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }

    GlobalConfig cfg = config_path.empty() ? GlobalConfig::defaults()
                                           : GlobalConfig::from_json_file(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (!out_dir.empty()) cfg.paths.out_dir = out_dir;
    cfg.validate();

    if (ldpc_cmd->parsed()) return cmd_ldpc_check(cfg);
    if (train_base_cmd->parsed()) return cmd_train_base(cfg, base_resume);
    if (train_adapters_cmd->parsed())
      return cmd_train_adapters(cfg, adapters_resume, base_weights_override);
    if (eval_cmd->parsed()) return cmd_eval(cfg, workers, weights_override);
    if (hwcost_cmd->parsed()) return cmd_hwcost(cfg);
    if (plot_cmd->parsed()) return cmd_plot(cfg, bler_csv, loss_csvs);
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const ShapeError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
