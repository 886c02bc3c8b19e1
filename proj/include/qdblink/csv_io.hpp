#ifndef QDBLINK_CSV_IO_HPP
#define QDBLINK_CSV_IO_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qdblink/blink_fit.hpp"
#include "qdblink/correlation.hpp"
#include "qdblink/tomography.hpp"

namespace qdb {

/// Header-addressed comma-separated table. Blank lines and lines starting
/// with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index, or -1 when absent.
  int column(std::string_view name) const;
  /// Throws ValidationError when the column is missing.
  int require(std::string_view name) const;
  double number(std::size_t row, int column) const;
};

/// Throws ValidationError on ragged rows.
CsvTable read_csv(std::istream& in);

/// Columns bin_center_ps, counts, normalized; log-spaced histograms add bin_width_ps.
void write_histogram_csv(std::ostream& out, const CorrelationHistogram& hist);

/// Histogram CSV read back as fit points. The bin straddling zero delay is
/// dropped when exclude_zero is set. sigma follows points_from_histogram,
/// using the counts-to-normalized ratio of the file.
std::vector<CorrelationPoint> read_histogram_points(std::istream& in, bool exclude_zero);

/// Columns power_nw, value and optionally sigma (default 1).
std::vector<SaturationPoint> read_saturation_csv(std::istream& in);

/// Columns setting (e.g. "HV"), counts and optionally acquisition_time_s.
std::vector<CoincidenceRecord> read_tomo_counts_csv(std::istream& in);

void write_sweep_csv(std::ostream& out, const SweepTable& table);

/// One row per label, one column per pulse delay; empty cells where a label
/// has no peak at that delay.
void write_delay_matrix_csv(std::ostream& out, std::span<const double> labels,
                            std::span<const PulseBinned> binned);

/// Columns row, col, real, imag for the 16 elements.
void write_density_matrix_csv(std::ostream& out, const DensityMatrix4& rho);

void write_fit_report(std::ostream& out, const BlinkFitResult& fit);
void write_fit_csv(std::ostream& out, const BlinkFitResult& fit);

void write_saturation_report(std::ostream& out, const SaturationFit& fit);
void write_saturation_csv(std::ostream& out, const SaturationFit& fit);

}  // namespace qdb

#endif  // QDBLINK_CSV_IO_HPP
