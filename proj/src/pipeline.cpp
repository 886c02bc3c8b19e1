#include "qdblink/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace qdb {
namespace {

CorrelationHistogram period_histogram(const TimeTagStream& stream, Channel a, Channel b,
                                      double tau_max_us, unsigned threads) {
  const std::int64_t P = stream.rep_period_ps();
  if (P <= 0) throw ValidationError("stream has no repetition period");
  const auto pulses = static_cast<std::int64_t>(std::ceil(tau_max_us * 1e6 / P));
  return correlate(stream, a, b, std::max<std::int64_t>(pulses, 1) * P, P, threads);
}

template <typename Fit>
PulsedAnalysis analyze(const TimeTagStream& stream, Channel a, Channel b,
                       const AnalysisOptions& options, bool exclude_central, Fit fit) {
  if (!(options.tau_max_us > 0.0)) throw ValidationError("analysis tau_max must be > 0");
  const std::int64_t P = stream.rep_period_ps();
  const double max_span_us = 0.1 * static_cast<double>(stream.duration_ps()) * 1e-6;

  PulsedAnalysis out;
  out.tau_max_us = options.tau_max_us;
  out.hist = period_histogram(stream, a, b, out.tau_max_us, options.threads);

  double window = options.norm_window_us;
  if (window <= 0.0) {
    double gamma = options.gamma_b_hint;
    if (!(gamma > 0.0)) {
      // Coarse pre-fit normalized on the outer half of the histogram.
      const auto coarse = pulse_bin(out.hist, P, exclude_central, 0.5 * out.tau_max_us);
      gamma = fit(coarse).gamma_b;
    }
    window = 5.0 / gamma;
    if (2.0 * window > out.tau_max_us) {
      out.tau_max_us = std::min(2.0 * window, max_span_us);
      out.hist = period_histogram(stream, a, b, out.tau_max_us, options.threads);
      if (window >= out.tau_max_us) window = 0.5 * out.tau_max_us;
    }
  }
  out.norm_window_us = window;
  out.hist.norm_window_ps = window * 1e6;
  out.binned = pulse_bin(out.hist, P, exclude_central, window);
  out.hist.normalization = out.binned.normalization;
  out.fit = fit(out.binned);
  return out;
}

}  // namespace

PulsedAnalysis analyze_auto(const TimeTagStream& stream, Channel channel,
                            const AnalysisOptions& options) {
  return analyze(stream, channel, channel, options, true,
                 [&](const PulseBinned& b) { return fit_auto(b, options.fit); });
}

PulsedAnalysis analyze_cross(const TimeTagStream& stream, Channel a, Channel b,
                             const AnalysisOptions& options) {
  return analyze(stream, a, b, options, false,
                 [&](const PulseBinned& binned) { return fit_cross(binned, options.fit); });
}

}  // namespace qdb
