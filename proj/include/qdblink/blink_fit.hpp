#ifndef QDBLINK_BLINK_FIT_HPP
#define QDBLINK_BLINK_FIT_HPP

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdblink/correlation.hpp"
#include "qdblink/error.hpp"

namespace qdb {

/// One normalized correlation value at a delay.
struct CorrelationPoint {
  double tau_us = 0.0;
  double g2 = 0.0;
  double sigma = 1.0;  // 1-sigma error; weight is 1 / sigma^2
};

/// Pulse peaks with |pulse_index| >= min_pulse_index.
std::vector<CorrelationPoint> points_from_peaks(const PulseBinned& binned, int min_pulse_index = 1);

/// Normalized bins of a linear or log histogram; sigma = sqrt(max(counts, 1)) / reference.
std::vector<CorrelationPoint> points_from_histogram(const CorrelationHistogram& hist);

enum class ModelId { kAuto, kCross };

const char* model_name(ModelId id);

struct BlinkFitResult {
  ModelId model = ModelId::kAuto;
  double beta = 0.0;
  double beta_err = 0.0;
  double gamma_b = 0.0;  // 1/us
  double gamma_b_err = 0.0;
  double gamma_gc = 0.0;
  double gamma_gc_err = 0.0;
  double gamma_cg = 0.0;
  double gamma_cg_err = 0.0;
  double gamma_diff_err = 0.0;  // 1-sigma of gamma_gc - gamma_cg
  double eta_ex = 0.0;
  double eta_ex_err = 0.0;
  // Covariance of (beta, gamma_b); only the gamma_b entry is set for cross fits.
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double chi2 = 0.0;
  double chi2_per_dof = 0.0;
  int dof = 0;
  int iterations = 0;
  double window_min_us = 0.0;  // smallest |tau| fitted
  double window_max_us = 0.0;
  std::size_t n_points = 0;
  std::vector<double> residuals;  // weighted, in input order

  // Cross model only. An unresolved recovery time is reported as an upper bound.
  double tau_rec_x = 0.0;
  double tau_rec_x_err = 0.0;
  bool tau_rec_x_upper_bound = false;
  double tau_rec_xp = 0.0;
  double tau_rec_xp_err = 0.0;
  bool tau_rec_xp_upper_bound = false;

  /// Bunching amplitude extrapolated to tau = 0 (auto model).
  double g2_at_zero() const { return 1.0 + 1.0 / beta; }
};

/// Non-convergence within the iteration budget. Carries the last iterate.
class FitConvergenceError : public NumericalError {
 public:
  FitConvergenceError(const std::string& what, Eigen::VectorXd last, int iterations)
      : NumericalError(what), last_(std::move(last)), iterations_(iterations) {}
  const Eigen::VectorXd& last_iterate() const { return last_; }
  int iterations() const { return iterations_; }

 private:
  Eigen::VectorXd last_;
  int iterations_;
};

struct FitOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-9;
  int min_pulse_index = 1;  // fit window lower bound for pulse-binned input
  double p_xx = 1.0;        // converts beta to eta_ex
  // Cross fits: beta from an independent auto fit, used to split gamma_b.
  std::optional<double> beta_for_cross;
  double beta_err_for_cross = 0.0;  // treated as independent of gamma_b
};

/// Fits 1 + exp(-gamma_b |tau|) / beta by damped least squares. The start
/// point comes from a log-linear regression of (g2 - 1). Needs >= 8 points
/// spanning at least one decay constant.
BlinkFitResult fit_auto(std::span<const CorrelationPoint> points, const FitOptions& options = {});

BlinkFitResult fit_auto(const PulseBinned& binned, const FitOptions& options = {});

/// Fits (1 - exp(-gamma_b |tau|)) times a sign-dependent antibunching
/// recovery with times tau_rec_x (tau < 0) and tau_rec_xp (tau > 0). A
/// recovery time below spacing / ln(1000) cannot be told apart from zero; it
/// is then reported as that upper bound and gamma_b is refitted without it.
BlinkFitResult fit_cross(std::span<const CorrelationPoint> points, const FitOptions& options = {});

BlinkFitResult fit_cross(const PulseBinned& binned, const FitOptions& options = {});

/// (n_mix - n_gate) / n_tp.
double normalized_intensity(double n_mix, double n_gate, double n_tp);

struct SaturationPoint {
  double power_nw = 0.0;
  double value = 0.0;
  double sigma = 1.0;
};

struct SaturationFit {
  double offset = 0.0;
  double offset_err = 0.0;
  double plateau = 0.0;
  double plateau_err = 0.0;
  double p_sat = 0.0;  // NaN when not identifiable
  double p_sat_err = 0.0;
  bool identifiable = true;
  double chi2_per_dof = 0.0;
  int iterations = 0;

  /// Saturated level offset + plateau.
  double saturated_level() const { return offset + plateau; }
};

/// Fits offset + plateau * P / (P + p_sat). Needs >= 5 distinct powers. A
/// plateau indistinguishable from zero leaves p_sat unidentifiable; the fit
/// is then flagged instead of failing.
SaturationFit fit_saturation(std::span<const SaturationPoint> points, int max_iterations = 200);

/// (N_X / N_total, N_X+ / N_total).
std::pair<double, double> intensity_ratios(double n_x, double n_xplus);

struct SweepInput {
  double label = 0.0;  // gate wavelength (nm) or power (nW)
  std::vector<CorrelationPoint> points;
};

struct SweepRow {
  double label = 0.0;
  std::optional<BlinkFitResult> fit;
  std::string error;  // set when the fit failed
};

struct SweepCrossing {
  double lower_label = 0.0;
  double upper_label = 0.0;
  double label = 0.0;  // linear interpolation of gamma_gc - gamma_cg = 0
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<SweepCrossing> crossings;
  // Labels where |gamma_gc - gamma_cg| is within 2 sigma of zero.
  std::vector<double> balanced_labels;
};

struct SweepOptions {
  ModelId model = ModelId::kAuto;
  FitOptions fit;
  unsigned threads = 1;
};

/// Fits every label independently; a failed fit is recorded in its row and
/// the sweep continues. Rows keep the input order. Labels must be unique.
SweepTable sweep_analysis(std::span<const SweepInput> inputs, const SweepOptions& options = {});

struct RunsTest {
  std::size_t runs = 0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  double z = 0.0;
  double p_value = 1.0;  // two-sided
};

/// Wald-Wolfowitz runs test on residual signs; exact zeros are skipped.
RunsTest runs_test(std::span<const double> residuals);

}  // namespace qdb

#endif  // QDBLINK_BLINK_FIT_HPP
