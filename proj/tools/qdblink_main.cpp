#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <map>

#include "qdblink/commands.hpp"
#include "qdblink/error.hpp"

namespace {

void add_common(CLI::App* cmd, qdb::CommonOptions& common) {
  cmd->add_option("--seed", common.seed, "random seed")->capture_default_str();
  cmd->add_option("--threads", common.threads, "worker threads")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();
  cmd->add_flag("-v,--verbose", common.verbose, "extra diagnostics");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blinking quantum-dot photon statistics toolkit"};
  app.require_subcommand(1);

  qdb::CommonOptions common;
  common.out = &std::cout;
  common.log = &std::cerr;

  qdb::SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate a time-tag stream into a QTT1 file");
  simulate->add_option("-c,--config", sim.config, "run configuration (INI)")
      ->check(CLI::ExistingFile);
  simulate->add_option("-o,--output", sim.output, "output .qtt file")->required();
  simulate->add_option("--duration", sim.duration_s, "acquisition time in seconds");
  add_common(simulate, common);

  qdb::CorrelateArgs cor;
  const std::map<std::string, qdb::CorrelateMode> modes{
      {"auto", qdb::CorrelateMode::kAuto},
      {"cross", qdb::CorrelateMode::kCross},
      {"log", qdb::CorrelateMode::kLog}};
  auto* correlate = app.add_subcommand("correlate", "coincidence histogram as CSV");
  correlate->add_option("input", cor.input, "input .qtt file")->required();
  correlate->add_option("-o,--output", cor.output, "output CSV")->required();
  correlate->add_option("-m,--mode", cor.mode, "auto, cross or log")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  correlate->add_option("-a,--channel-a", cor.channel_a, "start channel")->capture_default_str();
  correlate->add_option("-b,--channel-b", cor.channel_b, "stop channel (cross, log)");
  correlate->add_option("--tau-max-us", cor.tau_max_us, "largest delay")->capture_default_str();
  correlate->add_option("--tau-min-us", cor.tau_min_us, "smallest delay (log)")
      ->capture_default_str();
  correlate->add_option("--bin-ps", cor.bin_ps, "bin width; default one laser period");
  correlate->add_option("--norm-window-us", cor.norm_window_us,
                        "normalize on bins beyond this delay");
  correlate->add_option("--points-per-decade", cor.points_per_decade, "log bins per decade")
      ->capture_default_str();
  add_common(correlate, common);

  qdb::FitArgs fit;
  const std::map<std::string, qdb::FitModel> models{{"auto", qdb::FitModel::kAuto},
                                                    {"cross", qdb::FitModel::kCross},
                                                    {"saturation", qdb::FitModel::kSaturation}};
  auto* fitcmd = app.add_subcommand("fit", "fit a blinking or saturation model");
  fitcmd->add_option("input", fit.input, ".qtt file or CSV")->required();
  fitcmd->add_option("-m,--model", fit.model, "auto, cross or saturation")
      ->transform(CLI::CheckedTransformer(models, CLI::ignore_case));
  fitcmd->add_option("-a,--channel-a", fit.channel_a, "start channel")->capture_default_str();
  fitcmd->add_option("-b,--channel-b", fit.channel_b, "stop channel (cross)")
      ->capture_default_str();
  fitcmd->add_option("--tau-max-us", fit.tau_max_us, "histogram half-width")
      ->capture_default_str();
  fitcmd->add_option("--norm-window-us", fit.norm_window_us, "normalization window; 0 = auto");
  fitcmd->add_option("--min-pulse-index", fit.min_pulse_index, "first side peak fitted")
      ->capture_default_str();
  fitcmd->add_option("--max-iterations", fit.max_iterations)->capture_default_str();
  fitcmd->add_option("--p-xx", fit.p_xx, "biexciton preparation probability for eta_ex")
      ->capture_default_str();
  fitcmd->add_option("--report", fit.report, "text report path");
  fitcmd->add_option("--csv", fit.csv, "CSV row path");
  add_common(fitcmd, common);

  qdb::SweepArgs sweep;
  auto* sweepcmd = app.add_subcommand("sweep", "simulate and fit every label of a [sweep] grid");
  sweepcmd->add_option("-c,--config", sweep.config, "run configuration (INI)")
      ->required()
      ->check(CLI::ExistingFile);
  sweepcmd->add_option("-o,--output-dir", sweep.output_dir, "output directory")->required();
  add_common(sweepcmd, common);

  qdb::TomoArgs tomo;
  auto* tomocmd = app.add_subcommand("tomo", "two-photon polarization state tomography");
  auto* counts = tomocmd->add_option("--counts", tomo.counts, "setting,counts CSV");
  tomocmd->add_option("-c,--config", tomo.config, "simulate from the [tomo] section")
      ->excludes(counts);
  tomocmd->add_option("-o,--output-dir", tomo.output_dir, "output directory")->required();
  add_common(tomocmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(qdb::ExitCode::kValidation);
  }

  try {
    if (simulate->parsed()) qdb::cmd_simulate(sim, common);
    if (correlate->parsed()) qdb::cmd_correlate(cor, common);
    if (fitcmd->parsed()) qdb::cmd_fit(fit, common);
    if (sweepcmd->parsed()) qdb::cmd_sweep(sweep, common);
    if (tomocmd->parsed()) qdb::cmd_tomo(tomo, common);
  } catch (const qdb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
