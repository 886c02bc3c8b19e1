#ifndef QDBLINK_PIPELINE_HPP
#define QDBLINK_PIPELINE_HPP

#include "qdblink/blink_fit.hpp"
#include "qdblink/correlation.hpp"
#include "qdblink/timetag.hpp"

namespace qdb {

struct AnalysisOptions {
  double tau_max_us = 20.0;      // widened when the normalization window needs it
  double norm_window_us = 0.0;   // 0: 5 / gamma_b from a coarse pre-fit
  double gamma_b_hint = 0.0;     // skips the pre-fit when > 0 and no window is set
  FitOptions fit;
  unsigned threads = 1;
};

struct PulsedAnalysis {
  CorrelationHistogram hist;  // one bin per repetition period
  PulseBinned binned;
  BlinkFitResult fit;
  double tau_max_us = 0.0;
  double norm_window_us = 0.0;
};

/// Autocorrelation of one channel binned by laser period, normalized at
/// large delays, fitted with the bunching model.
PulsedAnalysis analyze_auto(const TimeTagStream& stream, Channel channel,
                            const AnalysisOptions& options = {});

/// Cross-correlation a -> b fitted with the blinking-dip model.
PulsedAnalysis analyze_cross(const TimeTagStream& stream, Channel a, Channel b,
                             const AnalysisOptions& options = {});

}  // namespace qdb

#endif  // QDBLINK_PIPELINE_HPP
