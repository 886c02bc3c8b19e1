#ifndef QDBLINK_CORRELATION_HPP
#define QDBLINK_CORRELATION_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "qdblink/timetag.hpp"

namespace qdb {

/// Coincidence counts between two tag sequences, binned in delay
/// tau = t_b - t_a.
struct CorrelationHistogram {
  std::vector<double> bin_edges_ps;   // size() + 1 entries, strictly increasing
  std::vector<std::uint64_t> counts;
  // Expected counts for uncorrelated streams of the same size and duration.
  std::vector<double> uncorrelated;
  // Mean counts per bin at |tau| >= norm_window; 0 when not set.
  double normalization = 0.0;
  double norm_window_ps = 0.0;
  Channel channel_a = Channel::kX;
  Channel channel_b = Channel::kX;
  std::size_t tags_a = 0;
  std::size_t tags_b = 0;
  std::int64_t duration_ps = 0;
  bool log_spaced = false;

  std::size_t size() const { return counts.size(); }
  double center(std::size_t i) const { return 0.5 * (bin_edges_ps[i] + bin_edges_ps[i + 1]); }
  double width(std::size_t i) const { return bin_edges_ps[i + 1] - bin_edges_ps[i]; }
  std::uint64_t total() const;

  /// counts / normalization when a normalization window was applied,
  /// counts / uncorrelated otherwise.
  std::vector<double> normalized() const;
};

struct CorrelateOptions {
  // Treat a and b as the same sequence: the pair of a tag with itself is
  // skipped.
  bool autocorrelation = false;
  std::int64_t duration_ps = 0;  // 0: span of the tags
  unsigned threads = 1;
};

/// Linear histogram with bins of width w centered on k * w for |k| <= K,
/// K = floor(tau_max / w). A delay d goes to bin sign(d) * floor((|d| + w/2) / w)
/// so that swapping a and b mirrors the histogram exactly. Sliding-window
/// sweep over the sorted inputs; cost is linear in tags times window occupancy.
CorrelationHistogram correlate(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                               std::int64_t tau_max_ps, std::int64_t bin_width_ps,
                               const CorrelateOptions& options = {});

CorrelationHistogram correlate(const TimeTagStream& stream, Channel a, Channel b,
                               std::int64_t tau_max_ps, std::int64_t bin_width_ps,
                               unsigned threads = 1);

/// Sets normalization to the mean count of bins whose center satisfies
/// |tau| >= norm_window. Throws if no bin qualifies.
void apply_norm_window(CorrelationHistogram& hist, double norm_window_ps);

struct PulsePeak {
  std::int64_t pulse_index = 0;
  double tau_ps = 0.0;
  double raw = 0.0;    // integrated coincidences
  double g2 = 0.0;     // normalized
  double sigma = 0.0;  // Poisson error propagated through the normalization
};

struct PulseBinned {
  std::int64_t rep_period_ps = 0;
  double normalization = 0.0;
  std::vector<PulsePeak> peaks;
};

/// Integrates coincidences in windows of one repetition period centered on
/// each pulse delay and normalizes by the mean of the peaks at
/// |tau| >= norm_window. Requires a linear histogram whose bin width divides
/// the period. Counts are corrected for the (T - |tau|) / T loss of pairs at
/// the acquisition edges before normalizing.
PulseBinned pulse_bin(const CorrelationHistogram& hist, std::int64_t rep_period_ps,
                      bool exclude_central, double norm_window_us);

/// Positive-delay correlation on logarithmically spaced edges between tau_min
/// and tau_max. Edges are snapped to (m + 1/2) * resolution so every bin
/// holds whole multiples of the resolution (pass the laser period for pulsed
/// streams). Each bin is normalized by its uncorrelated expectation, so an
/// uncorrelated pair of streams gives 1 at every delay.
CorrelationHistogram log_correlate(std::span<const std::int64_t> a,
                                   std::span<const std::int64_t> b, std::int64_t tau_min_ps,
                                   std::int64_t tau_max_ps, int points_per_decade,
                                   std::int64_t resolution_ps = 1, std::int64_t duration_ps = 0);

CorrelationHistogram log_correlate(const TimeTagStream& stream, Channel a, Channel b,
                                   std::int64_t tau_min_ps, std::int64_t tau_max_ps,
                                   int points_per_decade, std::int64_t resolution_ps = 1);

struct TraceCheck {
  double mean = 0.0;
  double sigma = 0.0;
  double chi2_per_dof = 0.0;
  double two_gaussian_chi2_per_dof = 0.0;
  bool bimodal = false;
};

/// Compares the histogram of trace counts with a single Gaussian (sample
/// mean and sigma) and with a two-component mixture fitted by EM. The trace
/// is flagged bimodal when the single-Gaussian chi2/dof exceeds the
/// mixture's by more than improvement_factor.
TraceCheck gaussian_trace_check(std::span<const std::uint64_t> counts,
                                double improvement_factor = 2.0);

}  // namespace qdb

#endif  // QDBLINK_CORRELATION_HPP
