#ifndef QDBLINK_RUN_CONFIG_HPP
#define QDBLINK_RUN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qdblink/dynamics.hpp"
#include "qdblink/photon_sim.hpp"

namespace qdb {

struct SweepConfig {
  std::string kind = "wavelength";  // label unit: wavelength (nm) or power (nW)
  std::vector<double> labels;
  // Per-label overrides; empty lists keep the [rates] / [gate] values.
  std::vector<double> gamma_gc_per_us;
  std::vector<double> gamma_cg_per_us;
  std::vector<double> gate_power_nw;
};

struct FitConfig {
  double tau_max_us = 20.0;
  int min_pulse_index = 1;
  double norm_window_us = 0.0;  // 0: 5 / gamma_b from a coarse pre-fit
  int max_iterations = 200;
  double log_tau_min_us = 0.0125;
  double log_tau_max_us = 1000.0;
  int points_per_decade = 8;
};

struct TomoConfig {
  std::string state = "werner";  // werner | bell | mixed
  double werner_p = 0.55;
  std::int64_t pairs_per_setting = 10000;
  int resamples = 200;
  std::string settings = "canonical";  // canonical | full
};

struct RunConfig {
  RateSet rates;
  PulseTrain pulses;
  double duration_s = 1.0;
  DetectorModel detector;
  GateLaserConfig gate;
  SweepConfig sweep;
  FitConfig fit;
  TomoConfig tomo;
};

/// Parses the INI-style document
///
///   [rates]    p_xx gamma_xx_per_ns gamma_x_per_ns gamma_gc_per_us gamma_cg_per_us
///              p_c gamma_c_per_ns gamma_e_d_per_us gamma_h_d_per_us
///   [pulses]   rep_rate_hz pulse_len_ps duration_s
///   [detector] efficiency_x efficiency_xx efficiency_xplus efficiency_aux
///              dark_rate_cps jitter_sigma_ps dead_time_ps
///   [gate]     wavelength_nm power_nw map_gc_per_nw_us map_cg_per_nw_us sat_power_nw
///   [sweep]    kind labels gamma_gc_per_us gamma_cg_per_us gate_power_nw   (lists: a, b, c)
///   [fit]      tau_max_us min_pulse_index norm_window_us max_iterations
///              log_tau_min_us log_tau_max_us points_per_decade
///   [tomo]     state werner_p pairs_per_setting resamples settings
///
/// Unknown sections or keys, malformed numbers and invalid values throw
/// ValidationError naming the key path (e.g. "rates.gamma_gc_per_us").
RunConfig parse_run_config(std::string_view text);

RunConfig load_run_config(const std::filesystem::path& path);

/// Base rates with the gate applied.
RateSet gated_rates(const RunConfig& config);

}  // namespace qdb

#endif  // QDBLINK_RUN_CONFIG_HPP
