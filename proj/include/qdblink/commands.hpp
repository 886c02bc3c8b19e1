#ifndef QDBLINK_COMMANDS_HPP
#define QDBLINK_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace qdb {

// Entry points behind the qdblink subcommands. Each throws a qdb::Error
// subclass on failure; the caller maps it to an exit code.

struct CommonOptions {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool verbose = false;
  std::ostream* out = nullptr;  // summary text; null discards
  std::ostream* log = nullptr;  // diagnostics; null discards
};

struct SimulateArgs {
  std::optional<std::filesystem::path> config;  // defaults when absent
  std::filesystem::path output;
  std::optional<double> duration_s;  // overrides pulses.duration_s
};

void cmd_simulate(const SimulateArgs& args, const CommonOptions& common);

enum class CorrelateMode { kAuto, kCross, kLog };

struct CorrelateArgs {
  std::filesystem::path input;
  std::filesystem::path output;
  CorrelateMode mode = CorrelateMode::kAuto;
  std::string channel_a = "X";
  // Cross mode defaults to XPLUS, log mode to channel_a (autocorrelation).
  std::optional<std::string> channel_b;
  double tau_max_us = 20.0;
  double bin_ps = 0.0;  // linear modes; 0 uses the repetition period
  // Linear modes: normalize by the mean bin at |tau| >= window; 0 divides by
  // the uncorrelated expectation instead.
  double norm_window_us = 0.0;
  double tau_min_us = 0.0125;  // log mode
  int points_per_decade = 8;   // log mode
};

void cmd_correlate(const CorrelateArgs& args, const CommonOptions& common);

enum class FitModel { kAuto, kCross, kSaturation };

struct FitArgs {
  // A .qtt time-tag file (auto, cross) or a CSV: histogram CSV for auto and
  // cross, power_nw,value[,sigma] for saturation.
  std::filesystem::path input;
  FitModel model = FitModel::kAuto;
  std::string channel_a = "X";
  std::string channel_b = "XPLUS";
  double tau_max_us = 20.0;
  double norm_window_us = 0.0;  // 0: chosen from a coarse pre-fit
  int min_pulse_index = 1;
  int max_iterations = 200;
  double p_xx = 1.0;
  std::optional<std::filesystem::path> report;  // text
  std::optional<std::filesystem::path> csv;     // one header and one row
};

void cmd_fit(const FitArgs& args, const CommonOptions& common);

struct SweepArgs {
  std::filesystem::path config;
  std::filesystem::path output_dir;
};

/// Simulates, correlates and fits every label of the [sweep] grid. Writes
/// sweep.csv, g2_matrix.csv, summary.txt and label_<value>/ artifacts.
void cmd_sweep(const SweepArgs& args, const CommonOptions& common);

struct TomoArgs {
  std::optional<std::filesystem::path> counts;  // setting,counts[,acquisition_time_s]
  std::optional<std::filesystem::path> config;  // [tomo] section when simulating
  std::filesystem::path output_dir;
};

/// Linear and maximum-likelihood reconstruction with a resampled fidelity
/// error. Writes rho_linear.csv, rho_mle.csv and report.txt.
void cmd_tomo(const TomoArgs& args, const CommonOptions& common);

}  // namespace qdb

#endif  // QDBLINK_COMMANDS_HPP
