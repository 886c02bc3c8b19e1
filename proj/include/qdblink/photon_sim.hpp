#ifndef QDBLINK_PHOTON_SIM_HPP
#define QDBLINK_PHOTON_SIM_HPP

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qdblink/dynamics.hpp"
#include "qdblink/timetag.hpp"
#include "qdblink/tomography.hpp"

namespace qdb {

struct PulseTrain {
  double rep_rate_hz = 80e6;
  double pulse_len_ps = 9.0;  // informational

  /// Repetition period rounded to whole picoseconds.
  std::int64_t period_ps() const;
};

void validate(const PulseTrain& pulses);

struct DetectorModel {
  // Indexed by Channel.
  std::array<double, kChannelCount> efficiency{0.01, 0.01, 0.01, 0.0};
  double dark_rate_cps = 50.0;
  double jitter_sigma_ps = 50.0;
  double dead_time_ps = 0.0;
};

void validate(const DetectorModel& det);

/// Counters gathered while running the charge telegraph.
struct TelegraphStats {
  std::uint64_t pulses_neutral = 0;
  std::uint64_t pulses_charged = 0;
  std::uint64_t switches = 0;
  double neutral_time_ps = 0.0;
  double charged_time_ps = 0.0;

  double neutral_time_fraction() const {
    const double total = neutral_time_ps + charged_time_ps;
    return total > 0.0 ? neutral_time_ps / total : 0.0;
  }
  double charged_pulse_fraction() const {
    const auto total = pulses_neutral + pulses_charged;
    return total > 0 ? double(pulses_charged) / double(total) : 0.0;
  }
};

struct SimulationResult {
  TimeTagStream stream;
  TelegraphStats telegraph;
};

/// Pulsed two-photon excitation of a blinking dot with an exact
/// continuous-time charge telegraph. Each pulse reads the current ground
/// state: a neutral dot emits an XX-X cascade with probability p_xx, a
/// charged dot an X+ photon with probability p_c. Cascades run to completion
/// regardless of later charge switches. Detection applies per-channel
/// efficiency, Gaussian jitter, Poisson dark counts and a per-channel dead
/// time. Deterministic for a given seed.
SimulationResult simulate_stream_detailed(const RateSet& rates, const PulseTrain& pulses,
                                          const DetectorModel& det, double duration_s,
                                          std::uint64_t seed);

TimeTagStream simulate_stream(const RateSet& rates, const PulseTrain& pulses,
                              const DetectorModel& det, double duration_s, std::uint64_t seed);

struct TraceBin {
  std::int64_t start_ps = 0;
  std::uint64_t counts = 0;
};

/// Contiguous fixed-width count trace of one channel. Trailing partial bins
/// are dropped.
std::vector<TraceBin> simulate_intensity_trace(const TimeTagStream& stream, double bin_ms,
                                               Channel channel = Channel::kX);

/// Poisson coincidence counts with mean pairs_per_setting * tr(rho P).
std::vector<CoincidenceRecord> simulate_polarized_pairs(
    const DensityMatrix4& rho, std::span<const ProjectorSetting> settings,
    std::int64_t pairs_per_setting, std::uint64_t seed);

}  // namespace qdb

#endif  // QDBLINK_PHOTON_SIM_HPP
