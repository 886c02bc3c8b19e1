#include "qdblink/photon_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "qdblink/error.hpp"

namespace qdb {
namespace {

constexpr double kPsPerUs = 1e6;
constexpr double kPsPerNs = 1e3;

// Number of failed pulses before the next success.
class PulseSkipper {
 public:
  explicit PulseSkipper(double q) : q_(q) {
    if (q_ > 0.0 && q_ < 1.0) dist_ = std::geometric_distribution<std::int64_t>(q_);
  }
  bool never() const { return q_ <= 0.0; }
  std::int64_t operator()(std::mt19937_64& rng) {
    if (q_ >= 1.0) return 0;
    return dist_(rng);
  }

 private:
  double q_;
  std::geometric_distribution<std::int64_t> dist_;
};

class Detector {
 public:
  Detector(const DetectorModel& det, std::int64_t duration_ps, std::vector<TimeTag>& out)
      : jitter_(0.0, det.jitter_sigma_ps > 0 ? det.jitter_sigma_ps : 1.0),
        has_jitter_(det.jitter_sigma_ps > 0.0),
        duration_ps_(duration_ps),
        out_(out) {}

  void record(double t_ps, Channel c, std::mt19937_64& rng) {
    if (has_jitter_) t_ps += jitter_(rng);
    const auto t = static_cast<std::int64_t>(std::llround(t_ps));
    if (t < 0 || t > duration_ps_) return;
    out_.push_back({t, c});
  }

 private:
  std::normal_distribution<double> jitter_;
  bool has_jitter_;
  std::int64_t duration_ps_;
  std::vector<TimeTag>& out_;
};

}  // namespace

std::int64_t PulseTrain::period_ps() const {
  return static_cast<std::int64_t>(std::llround(1e12 / rep_rate_hz));
}

void validate(const PulseTrain& pulses) {
  if (!(pulses.rep_rate_hz > 0.0)) throw ValidationError("pulses.rep_rate_hz must be > 0");
  if (pulses.period_ps() < 1) throw ValidationError("pulses.rep_rate_hz exceeds 1 THz");
}

void validate(const DetectorModel& det) {
  for (double e : det.efficiency) {
    if (!(e >= 0.0 && e <= 1.0)) throw ValidationError("detector efficiency must lie in [0, 1]");
  }
  if (!(det.dark_rate_cps >= 0.0)) throw ValidationError("detector.dark_rate_cps must be >= 0");
  if (!(det.jitter_sigma_ps >= 0.0)) {
    throw ValidationError("detector.jitter_sigma_ps must be >= 0");
  }
  if (!(det.dead_time_ps >= 0.0)) throw ValidationError("detector.dead_time_ps must be >= 0");
}

SimulationResult simulate_stream_detailed(const RateSet& rates, const PulseTrain& pulses,
                                          const DetectorModel& det, double duration_s,
                                          std::uint64_t seed) {
  validate(rates);
  validate(pulses);
  validate(det);
  if (!(duration_s * pulses.rep_rate_hz >= 1.0)) {
    throw ValidationError("simulate_stream: duration is shorter than one laser period");
  }

  const std::int64_t period = pulses.period_ps();
  const auto duration_ps = static_cast<std::int64_t>(std::llround(duration_s * 1e12));
  const std::int64_t n_pulses = (duration_ps + period - 1) / period;  // pulses at k*period < T

  const double eff_x = det.efficiency[static_cast<std::size_t>(Channel::kX)];
  const double eff_xx = det.efficiency[static_cast<std::size_t>(Channel::kXX)];
  const double eff_xp = det.efficiency[static_cast<std::size_t>(Channel::kXPlus)];

  // A cascade is simulated only when at least one of its photons is detected.
  const double cascade_seen = 1.0 - (1.0 - eff_x) * (1.0 - eff_xx);
  PulseSkipper neutral_skip(rates.p_xx * cascade_seen);
  PulseSkipper charged_skip(rates.p_c * eff_xp);
  std::discrete_distribution<int> cascade_outcome(
      {eff_x * (1.0 - eff_xx), eff_xx * (1.0 - eff_x), eff_x * eff_xx});

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> decay_xx(rates.gamma_xx_per_ns / kPsPerNs);
  std::exponential_distribution<double> decay_x(rates.gamma_x_per_ns / kPsPerNs);
  std::exponential_distribution<double> decay_c(rates.gamma_c_per_ns / kPsPerNs);
  const double rate_gc = rates.effective_gc_per_us() / kPsPerUs;
  const double rate_cg = rates.effective_cg_per_us() / kPsPerUs;

  std::vector<TimeTag> records;
  {
    const double gb = rates.effective_gc_per_us() + rates.effective_cg_per_us();
    const double p_neutral = gb > 0 ? rates.effective_cg_per_us() / gb : 1.0;
    const double expected =
        n_pulses * (p_neutral * rates.p_xx * (eff_x + eff_xx) + (1 - p_neutral) * rates.p_c * eff_xp) +
        3.0 * det.dark_rate_cps * duration_s;
    records.reserve(static_cast<std::size_t>(expected * 1.05 + 1024));
  }
  Detector detector(det, duration_ps, records);

  SimulationResult result;
  TelegraphStats& stats = result.telegraph;

  const double total_rate = rate_gc + rate_cg;
  bool neutral = total_rate > 0.0
                     ? std::bernoulli_distribution(rate_cg / total_rate)(rng)
                     : true;
  double t_start = 0.0;
  const double t_final = static_cast<double>(duration_ps);
  while (t_start < t_final) {
    const double out_rate = neutral ? rate_gc : rate_cg;
    double t_end = t_final;
    if (out_rate > 0.0) {
      t_end = std::min(t_final, t_start + std::exponential_distribution<double>(out_rate)(rng));
    }

    // Pulses k with t_start <= k * period < t_end.
    auto k = static_cast<std::int64_t>(std::ceil(t_start / period));
    auto k_end = static_cast<std::int64_t>(std::ceil(t_end / period));
    k_end = std::min(k_end, n_pulses);
    k = std::min(k, k_end);
    (neutral ? stats.pulses_neutral : stats.pulses_charged) += static_cast<std::uint64_t>(k_end - k);
    (neutral ? stats.neutral_time_ps : stats.charged_time_ps) += t_end - t_start;

    PulseSkipper& skip = neutral ? neutral_skip : charged_skip;
    if (!skip.never()) {
      for (k += skip(rng); k < k_end; k += 1 + skip(rng)) {
        const double t_pulse = static_cast<double>(k * period);
        if (neutral) {
          const double t_xx = t_pulse + decay_xx(rng);
          const double t_x = t_xx + decay_x(rng);
          const int outcome = cascade_outcome(rng);
          if (outcome != 1) detector.record(t_x, Channel::kX, rng);
          if (outcome != 0) detector.record(t_xx, Channel::kXX, rng);
        } else {
          detector.record(t_pulse + decay_c(rng), Channel::kXPlus, rng);
        }
      }
    }

    if (t_end < t_final) ++stats.switches;
    t_start = t_end;
    neutral = !neutral;
  }

  if (det.dark_rate_cps > 0.0) {
    std::poisson_distribution<std::int64_t> dark_count(det.dark_rate_cps * duration_s);
    std::uniform_int_distribution<std::int64_t> when(0, duration_ps);
    for (Channel c : {Channel::kX, Channel::kXX, Channel::kXPlus}) {
      const std::int64_t n = dark_count(rng);
      for (std::int64_t i = 0; i < n; ++i) records.push_back({when(rng), c});
    }
  }

  std::sort(records.begin(), records.end(), [](const TimeTag& a, const TimeTag& b) {
    return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps
                                            : a.channel < b.channel;
  });

  if (det.dead_time_ps > 0.0) {
    std::array<std::int64_t, kChannelCount> last;
    last.fill(std::numeric_limits<std::int64_t>::min());
    auto kept = std::remove_if(records.begin(), records.end(), [&](const TimeTag& r) {
      auto& prev = last[static_cast<std::size_t>(r.channel)];
      if (prev != std::numeric_limits<std::int64_t>::min() &&
          static_cast<double>(r.timestamp_ps - prev) < det.dead_time_ps) {
        return true;
      }
      prev = r.timestamp_ps;
      return false;
    });
    records.erase(kept, records.end());
  }

  result.stream = TimeTagStream(std::move(records), duration_ps, period);
  result.stream.provenance().rates = rates;
  result.stream.provenance().seed = seed;
  result.stream.provenance().warnings = rate_warnings(rates);
  return result;
}

TimeTagStream simulate_stream(const RateSet& rates, const PulseTrain& pulses,
                              const DetectorModel& det, double duration_s, std::uint64_t seed) {
  return simulate_stream_detailed(rates, pulses, det, duration_s, seed).stream;
}

std::vector<TraceBin> simulate_intensity_trace(const TimeTagStream& stream, double bin_ms,
                                               Channel channel) {
  const double bin_ps_f = bin_ms * 1e9;
  if (!(bin_ps_f >= 1.0)) throw ValidationError("intensity trace: bin must be > 0");
  const auto bin_ps = static_cast<std::int64_t>(std::llround(bin_ps_f));
  if (stream.empty()) return {};
  if (bin_ps >= stream.duration_ps()) {
    throw ValidationError("intensity trace: bin must be shorter than the stream duration");
  }
  const std::int64_t n_bins = stream.duration_ps() / bin_ps;
  std::vector<TraceBin> trace(static_cast<std::size_t>(n_bins));
  for (std::int64_t i = 0; i < n_bins; ++i) trace[i].start_ps = i * bin_ps;
  for (const auto& r : stream.records()) {
    if (r.channel != channel) continue;
    const std::int64_t i = r.timestamp_ps / bin_ps;
    if (i < n_bins) ++trace[i].counts;
  }
  return trace;
}

std::vector<CoincidenceRecord> simulate_polarized_pairs(const DensityMatrix4& rho,
                                                        std::span<const ProjectorSetting> settings,
                                                        std::int64_t pairs_per_setting,
                                                        std::uint64_t seed) {
  if (pairs_per_setting <= 0) {
    throw ValidationError("simulate_polarized_pairs: pairs_per_setting must be > 0");
  }
  if (!check_physical(rho).is_physical(1e-10, 1e-10, 1e-9)) {
    throw ValidationError("simulate_polarized_pairs: density matrix is not physical");
  }
  std::mt19937_64 rng(seed);
  std::vector<CoincidenceRecord> out;
  out.reserve(settings.size());
  for (const auto& s : settings) {
    const double mean = static_cast<double>(pairs_per_setting) *
                        std::max(0.0, expected_probability(rho, s));
    std::int64_t n = 0;
    if (mean > 0.0) n = std::poisson_distribution<std::int64_t>(mean)(rng);
    out.push_back({s, n, 1.0});
  }
  return out;
}

}  // namespace qdb
