#include "qdblink/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "qdblink/csv_io.hpp"
#include "qdblink/error.hpp"
#include "qdblink/pipeline.hpp"
#include "qdblink/photon_sim.hpp"
#include "qdblink/qtt_file.hpp"
#include "qdblink/run_config.hpp"
#include "qdblink/tomography.hpp"

namespace qdb {
namespace {

namespace fs = std::filesystem;

std::ostream& sink(std::ostream* os) {
  static std::ostream null(nullptr);
  return os != nullptr ? *os : null;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string label_text(double label) {
  std::ostringstream s;
  s << label;
  return s.str();
}

std::string available_channels(const TimeTagStream& stream) {
  const auto counts = stream.counts_per_channel();
  std::string out;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    if (counts[c] == 0) continue;
    if (!out.empty()) out += ", ";
    out += channel_name(static_cast<Channel>(c));
  }
  return out.empty() ? "none" : out;
}

Channel resolve_channel(const TimeTagStream& stream, const std::string& name) {
  const auto channel = parse_channel(name);
  if (!channel) {
    throw ValidationError("unknown channel '" + name + "'; available: " +
                          available_channels(stream));
  }
  if (stream.counts_per_channel()[static_cast<std::size_t>(*channel)] == 0) {
    throw ValidationError("channel " + std::string(channel_name(*channel)) +
                          " has no tags; available: " + available_channels(stream));
  }
  return *channel;
}

std::int64_t to_ps(double us) { return std::llround(us * 1e6); }

bool is_qtt(const fs::path& path) { return path.extension() == ".qtt"; }

}  // namespace

void cmd_simulate(const SimulateArgs& args, const CommonOptions& common) {
  auto& out = sink(common.out);
  auto& log = sink(common.log);
  RunConfig config = args.config ? load_run_config(*args.config) : RunConfig{};
  if (args.duration_s) {
    if (!(*args.duration_s > 0.0)) throw ValidationError("duration must be > 0");
    config.duration_s = *args.duration_s;
  }
  const RateSet rates = gated_rates(config);
  for (const auto& w : rate_warnings(rates)) log << "warning: " << w << '\n';

  const auto sim = simulate_stream_detailed(rates, config.pulses, config.detector,
                                            config.duration_s, common.seed);
  write_qtt(args.output, sim.stream);

  std::optional<SteadyState> ss;
  try {
    ss = steady_state(rates, config.pulses.rep_rate_hz, 1.0);
  } catch (const ValidationError&) {
    // Both switching rates zero: occupation depends on the initial state.
  }
  const auto counts = sim.stream.counts_per_channel();
  out << "wrote " << sim.stream.size() << " tags to " << args.output.string() << " ("
      << config.duration_s << " s, seed " << common.seed << ")\n";
  out << "channel      tags   realized_cps   expected_cps\n";
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto ch = static_cast<Channel>(c);
    const double eff = config.detector.efficiency[c];
    double expected = std::nan("");
    if (ss) {
      const double photons = ch == Channel::kXPlus ? ss->rate_xplus
                             : ch == Channel::kAux ? 0.0
                                                   : ss->rate_x;
      expected = eff * photons + (ch == Channel::kAux ? 0.0 : config.detector.dark_rate_cps);
    }
    out << std::left << std::setw(8) << channel_name(ch) << std::right << std::setw(10)
        << counts[c] << std::setw(15) << std::setprecision(6)
        << static_cast<double>(counts[c]) / config.duration_s << std::setw(15) << expected
        << '\n';
  }
  if (common.verbose) {
    const auto& t = sim.telegraph;
    log << "telegraph: " << t.switches << " switches, neutral time fraction "
        << t.neutral_time_fraction() << ", charged pulse fraction " << t.charged_pulse_fraction()
        << '\n';
  }
}

void cmd_correlate(const CorrelateArgs& args, const CommonOptions& common) {
  auto& out = sink(common.out);
  const auto stream = read_qtt(args.input);
  const Channel a = resolve_channel(stream, args.channel_a);
  const std::string b_name = args.channel_b.value_or(
      args.mode == CorrelateMode::kCross ? std::string("XPLUS") : args.channel_a);
  const Channel b = args.mode == CorrelateMode::kAuto ? a : resolve_channel(stream, b_name);
  if (!(args.tau_max_us > 0.0)) throw ValidationError("tau_max must be > 0");

  CorrelationHistogram hist;
  if (args.mode == CorrelateMode::kLog) {
    const std::int64_t resolution = std::max<std::int64_t>(stream.rep_period_ps(), 1);
    hist = log_correlate(stream, a, b, to_ps(args.tau_min_us), to_ps(args.tau_max_us),
                         args.points_per_decade, resolution);
  } else {
    const std::int64_t bin = args.bin_ps > 0.0 ? std::llround(args.bin_ps) : stream.rep_period_ps();
    if (bin <= 0) throw ValidationError("bin width required: the stream has no repetition period");
    hist = correlate(stream, a, b, to_ps(args.tau_max_us), bin, common.threads);
    if (args.norm_window_us > 0.0) apply_norm_window(hist, args.norm_window_us * 1e6);
  }

  auto file = open_output(args.output);
  write_histogram_csv(file, hist);
  finish(file, args.output);

  out << "wrote " << hist.size() << " bins (" << hist.total() << " coincidences, "
      << channel_name(a) << " -> " << channel_name(b) << ") to " << args.output.string() << '\n';
  if (common.verbose && !hist.log_spaced) {
    const auto norm = hist.normalized();
    out << "normalized bin at zero delay: " << norm[hist.size() / 2] << '\n';
  }
}

void cmd_fit(const FitArgs& args, const CommonOptions& common) {
  auto& out = sink(common.out);
  auto& log = sink(common.log);

  std::ostringstream report, row;
  if (args.model == FitModel::kSaturation) {
    if (is_qtt(args.input)) throw ValidationError("saturation fits take a power_nw,value CSV");
    auto in = open_input(args.input);
    const auto points = read_saturation_csv(in);
    const auto fit = fit_saturation(points, args.max_iterations);
    write_saturation_report(report, fit);
    write_saturation_csv(row, fit);
  } else {
    FitOptions fo;
    fo.max_iterations = args.max_iterations;
    fo.min_pulse_index = args.min_pulse_index;
    fo.p_xx = args.p_xx;
    const bool cross = args.model == FitModel::kCross;
    try {
      BlinkFitResult fit;
      if (is_qtt(args.input)) {
        const auto stream = read_qtt(args.input);
        const Channel a = resolve_channel(stream, args.channel_a);
        AnalysisOptions ao;
        ao.tau_max_us = args.tau_max_us;
        ao.norm_window_us = args.norm_window_us;
        ao.fit = fo;
        ao.threads = common.threads;
        if (cross) {
          const Channel b = resolve_channel(stream, args.channel_b);
          // The auto fit of channel a supplies beta for splitting gamma_b.
          try {
            const auto auto_fit = analyze_auto(stream, a, ao).fit;
            ao.fit.beta_for_cross = auto_fit.beta;
            ao.fit.beta_err_for_cross = auto_fit.beta_err;
          } catch (const Error& e) {
            log << "warning: no auto fit for beta (" << e.what() << ")\n";
          }
          fit = analyze_cross(stream, a, b, ao).fit;
        } else {
          fit = analyze_auto(stream, a, ao).fit;
        }
      } else {
        auto in = open_input(args.input);
        const auto points = read_histogram_points(in, !cross);
        fit = cross ? fit_cross(points, fo) : fit_auto(points, fo);
      }
      write_fit_report(report, fit);
      const auto runs = runs_test(fit.residuals);
      report << "runs test        " << runs.runs << " runs, p = " << runs.p_value << '\n';
      write_fit_csv(row, fit);
    } catch (const FitConvergenceError& e) {
      log << "fit did not converge after " << e.iterations() << " iterations; last iterate:";
      for (double v : e.last_iterate()) log << ' ' << v;
      log << '\n';
      throw;
    }
  }

  out << report.str();
  if (args.report) {
    auto file = open_output(*args.report);
    file << report.str();
    finish(file, *args.report);
  }
  if (args.csv) {
    auto file = open_output(*args.csv);
    file << row.str();
    finish(file, *args.csv);
  }
}

void cmd_sweep(const SweepArgs& args, const CommonOptions& common) {
  auto& out = sink(common.out);
  auto& log = sink(common.log);
  const RunConfig config = load_run_config(args.config);
  const auto& sw = config.sweep;
  if (sw.labels.empty()) throw ValidationError("sweep.labels is empty");
  make_dir(args.output_dir);

  AnalysisOptions ao;
  ao.tau_max_us = config.fit.tau_max_us;
  ao.norm_window_us = config.fit.norm_window_us;
  ao.fit.max_iterations = config.fit.max_iterations;
  ao.fit.min_pulse_index = config.fit.min_pulse_index;
  ao.fit.p_xx = config.rates.p_xx;
  ao.threads = common.threads;

  std::vector<SweepInput> inputs;
  std::vector<PulseBinned> binned;
  std::vector<std::string> failures(sw.labels.size());
  for (std::size_t i = 0; i < sw.labels.size(); ++i) {
    const double label = sw.labels[i];
    inputs.push_back({label, {}});
    binned.emplace_back();
    try {
      RateSet rates = config.rates;
      if (!sw.gamma_gc_per_us.empty()) rates.gamma_gc_per_us = sw.gamma_gc_per_us[i];
      if (!sw.gamma_cg_per_us.empty()) rates.gamma_cg_per_us = sw.gamma_cg_per_us[i];
      GateLaserConfig gate = config.gate;
      if (sw.kind == "wavelength") gate.wavelength_nm = label;
      if (!sw.gate_power_nw.empty()) {
        gate.power_nw = sw.gate_power_nw[i];
      } else if (sw.kind == "power") {
        gate.power_nw = label;
      }
      rates = apply_gate(rates, gate);

      const auto stream = simulate_stream(rates, config.pulses, config.detector,
                                          config.duration_s, common.seed + i);
      const auto analysis = analyze_auto(stream, Channel::kX, ao);
      inputs.back().points = points_from_peaks(analysis.binned, ao.fit.min_pulse_index);
      binned.back() = analysis.binned;

      const fs::path dir = args.output_dir / ("label_" + label_text(label));
      make_dir(dir);
      auto hist = open_output(dir / "g2.csv");
      write_histogram_csv(hist, analysis.hist);
      finish(hist, dir / "g2.csv");
      auto fit = open_output(dir / "fit.txt");
      write_fit_report(fit, analysis.fit);
      finish(fit, dir / "fit.txt");
      if (common.verbose) log << "label " << label << ": gamma_b " << analysis.fit.gamma_b << '\n';
    } catch (const Error& e) {
      failures[i] = e.what();
      log << "label " << label << " failed: " << e.what() << '\n';
    }
  }

  SweepOptions so;
  so.fit = ao.fit;
  so.threads = common.threads;
  SweepTable table = sweep_analysis(inputs, so);
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) table.rows[i].error = failures[i];
  }

  auto csv = open_output(args.output_dir / "sweep.csv");
  write_sweep_csv(csv, table);
  finish(csv, args.output_dir / "sweep.csv");
  auto matrix = open_output(args.output_dir / "g2_matrix.csv");
  write_delay_matrix_csv(matrix, sw.labels, binned);
  finish(matrix, args.output_dir / "g2_matrix.csv");

  std::ostringstream summary;
  summary << "label        gamma_b        beta   gamma_gc   gamma_cg\n" << std::setprecision(5);
  for (const auto& r : table.rows) {
    summary << std::left << std::setw(10) << r.label << std::right;
    if (r.fit) {
      summary << std::setw(10) << r.fit->gamma_b << std::setw(12) << r.fit->beta << std::setw(11)
              << r.fit->gamma_gc << std::setw(11) << r.fit->gamma_cg << '\n';
    } else {
      summary << "  failed: " << r.error << '\n';
    }
  }
  for (const auto& c : table.crossings) {
    summary << "crossing gamma_gc = gamma_cg at " << c.label << " (between " << c.lower_label
            << " and " << c.upper_label << ")\n";
  }
  for (double b : table.balanced_labels) summary << "balanced within 2 sigma at " << b << '\n';
  if (table.crossings.empty()) summary << "no crossing of gamma_gc and gamma_cg\n";

  auto file = open_output(args.output_dir / "summary.txt");
  file << summary.str();
  finish(file, args.output_dir / "summary.txt");
  out << summary.str();
}

void cmd_tomo(const TomoArgs& args, const CommonOptions& common) {
  auto& out = sink(common.out);
  if (args.counts && args.config) {
    throw ValidationError("give either a counts CSV or a config to simulate from, not both");
  }

  std::vector<CoincidenceRecord> records;
  std::optional<double> expected;
  const TomoConfig tomo = args.config ? load_run_config(*args.config).tomo : TomoConfig{};
  if (args.counts) {
    auto in = open_input(*args.counts);
    records = read_tomo_counts_csv(in);
  } else {
    DensityMatrix4 rho;
    if (tomo.state == "werner") {
      rho = werner_state(tomo.werner_p);
    } else if (tomo.state == "bell") {
      rho = pure_state(phi_plus());
    } else {
      rho = maximally_mixed();
    }
    expected = fidelity(rho);
    const auto& settings = tomo.settings == "full" ? full_settings() : canonical_settings();
    records = simulate_polarized_pairs(rho, settings, tomo.pairs_per_setting, common.seed);
  }
  require_informationally_complete(records);

  const auto linear = linear_reconstruct(records);
  const auto mle = mle_reconstruct(records);
  ResampleOptions ro;
  ro.n_resamples = tomo.resamples;
  ro.seed = common.seed + 1;
  ro.threads = common.threads;
  const auto resampled = tomo.resamples > 0 ? resample_errors(records, ro) : ResampleSummary{};
  const auto phys = check_physical(mle.rho);

  make_dir(args.output_dir);
  for (const auto& [name, rho] : {std::pair{"rho_linear.csv", &linear.rho},
                                  std::pair{"rho_mle.csv", &mle.rho}}) {
    auto file = open_output(args.output_dir / name);
    write_density_matrix_csv(file, *rho);
    finish(file, args.output_dir / name);
  }

  std::ostringstream report;
  report << std::setprecision(6);
  report << "settings             " << records.size() << '\n'
         << "fidelity (linear)    " << fidelity(linear.rho) << '\n'
         << "fidelity (MLE)       " << fidelity(mle.rho);
  if (tomo.resamples > 0) report << " +/- " << resampled.fidelity_sigma;
  report << '\n';
  if (expected) report << "fidelity (true)      " << *expected << '\n';
  if (tomo.resamples > 0) {
    report << "resamples            " << resampled.used << " used, " << resampled.dropped
           << " dropped\n";
  }
  report << "linear min eigenvalue " << linear.min_eigenvalue
         << (linear.negative ? "  (unphysical)" : "") << '\n'
         << "MLE physical         " << (phys.is_physical() ? "yes" : "no")
         << "  (min eigenvalue " << phys.min_eigenvalue << ", trace error " << phys.trace_error
         << ")\n"
         << "MLE iterations       " << mle.iterations << (mle.converged ? "" : " (not converged)")
         << ", log-likelihood " << mle.log_likelihood << '\n';

  auto file = open_output(args.output_dir / "report.txt");
  file << report.str();
  finish(file, args.output_dir / "report.txt");
  out << report.str();
}

}  // namespace qdb
