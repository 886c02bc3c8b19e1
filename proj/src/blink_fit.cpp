#include "qdblink/blink_fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "qdblink/dynamics.hpp"
#include "qdblink/least_squares.hpp"

namespace qdb {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_valid_points(std::span<const CorrelationPoint> points) {
  for (const auto& p : points) {
    if (!std::isfinite(p.tau_us) || !std::isfinite(p.g2) || !(p.sigma > 0.0) ||
        !std::isfinite(p.sigma)) {
      throw ValidationError("fit points need finite values and sigma > 0");
    }
  }
}

struct LogLinear {
  double amplitude = 0.0;
  double rate = 0.0;
  bool ok = false;
};

// Weighted regression ln(y) = ln(A) - rate * x over y > 0, weights y^2 / sigma^2.
LogLinear log_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                         const std::vector<double>& sigma) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) continue;
    const double w = y[i] * y[i] / (sigma[i] * sigma[i]);
    const double ly = std::log(y[i]);
    sw += w;
    sx += w * x[i];
    sy += w * ly;
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * ly;
    ++n;
  }
  LogLinear out;
  const double det = sw * sxx - sx * sx;
  if (n < 2 || !(det > 0.0)) return out;
  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / sw;
  out.amplitude = std::exp(intercept);
  out.rate = -slope;
  out.ok = std::isfinite(out.amplitude) && out.rate > 0.0;
  return out;
}

void fill_window(BlinkFitResult& r, std::span<const CorrelationPoint> points) {
  r.window_min_us = std::numeric_limits<double>::infinity();
  r.window_max_us = 0.0;
  for (const auto& p : points) {
    r.window_min_us = std::min(r.window_min_us, std::abs(p.tau_us));
    r.window_max_us = std::max(r.window_max_us, std::abs(p.tau_us));
  }
  r.n_points = points.size();
}

void fill_fit_stats(BlinkFitResult& r, const LeastSquaresResult& ls) {
  r.chi2 = ls.chi2;
  r.dof = ls.dof();
  r.chi2_per_dof = r.dof > 0 ? ls.chi2 / r.dof : 0.0;
  r.iterations = ls.iterations;
  r.residuals.assign(ls.residuals.data(), ls.residuals.data() + ls.residuals.size());
}

double covariance_scale(const LeastSquaresResult& ls) {
  return ls.dof() > 0 ? ls.chi2 / ls.dof() : 1.0;
}

// Splits gamma_b by beta and propagates the (beta, gamma_b) covariance.
void fill_rates(BlinkFitResult& r, double p_xx) {
  const double beta = r.beta;
  const double g = r.gamma_b;
  const auto split = decompose_rates(beta, g);
  r.gamma_gc = split.gamma_gc_per_us;
  r.gamma_cg = split.gamma_cg_per_us;
  const double q = 1.0 + beta;
  const Eigen::RowVector2d d_gc(-g / (q * q), 1.0 / q);
  const Eigen::RowVector2d d_cg(g / (q * q), beta / q);
  const Eigen::RowVector2d d_diff = d_gc - d_cg;
  r.gamma_gc_err = std::sqrt(std::max(0.0, (d_gc * r.covariance * d_gc.transpose())(0)));
  r.gamma_cg_err = std::sqrt(std::max(0.0, (d_cg * r.covariance * d_cg.transpose())(0)));
  r.gamma_diff_err = std::sqrt(std::max(0.0, (d_diff * r.covariance * d_diff.transpose())(0)));
  r.eta_ex = eta_ex_from_beta(p_xx, beta);
  r.eta_ex_err = p_xx * r.beta_err / (q * q);
}

LeastSquaresOptions ls_options(const FitOptions& o) {
  LeastSquaresOptions ls;
  ls.max_iterations = o.max_iterations;
  ls.step_tolerance = o.step_tolerance;
  return ls;
}

// Antibunching recovery 1 - exp(-|tau| / t) and d/d(ln t); t = 0 means
// instantaneous recovery.
std::pair<double, double> recovery(double abs_tau, double t) {
  if (t <= 0.0) return {1.0, 0.0};
  const double x = abs_tau / t;
  if (x > 700.0) return {1.0, 0.0};
  const double e = std::exp(-x);
  return {1.0 - e, -e * x};
}

struct CrossParams {
  bool free_x = true;
  bool free_xp = true;
};

LeastSquaresResult run_cross(std::span<const CorrelationPoint> points, double gamma0, double tx0,
                             double txp0, CrossParams which, const FitOptions& options) {
  const int n_par = 1 + int(which.free_x) + int(which.free_xp);
  Eigen::VectorXd x0(n_par);
  int idx = 0;
  x0(idx++) = std::log(gamma0);
  if (which.free_x) x0(idx++) = std::log(tx0);
  if (which.free_xp) x0(idx++) = std::log(txp0);

  auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    int k = 0;
    const double gamma = std::exp(p(k++));
    const double tx = which.free_x ? std::exp(p(k++)) : 0.0;
    const double txp = which.free_xp ? std::exp(p(k++)) : 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& pt = points[i];
      const double at = std::abs(pt.tau_us);
      const double e = std::exp(-gamma * at);
      const double blink = 1.0 - e;
      double anti, d_anti_x = 0.0, d_anti_xp = 0.0;
      if (pt.tau_us > 0.0) {
        std::tie(anti, d_anti_xp) = recovery(at, txp);
      } else if (pt.tau_us < 0.0) {
        std::tie(anti, d_anti_x) = recovery(at, tx);
      } else {
        anti = 0.0;  // blink factor vanishes at zero delay
      }
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = (blink * anti - pt.g2) / pt.sigma;
      if (jac != nullptr) {
        int c = 0;
        (*jac)(row, c++) = gamma * at * e * anti / pt.sigma;
        if (which.free_x) (*jac)(row, c++) = blink * d_anti_x / pt.sigma;
        if (which.free_xp) (*jac)(row, c++) = blink * d_anti_xp / pt.sigma;
      }
    }
  };
  return damped_least_squares(fn, x0, static_cast<int>(points.size()), ls_options(options));
}

}  // namespace

const char* model_name(ModelId id) { return id == ModelId::kAuto ? "auto" : "cross"; }

std::vector<CorrelationPoint> points_from_peaks(const PulseBinned& binned, int min_pulse_index) {
  std::vector<CorrelationPoint> out;
  const std::int64_t k_min = std::max(1, min_pulse_index);
  for (const auto& p : binned.peaks) {
    if (std::abs(p.pulse_index) < k_min) continue;
    out.push_back({p.tau_ps * 1e-6, p.g2, p.sigma});
  }
  return out;
}

std::vector<CorrelationPoint> points_from_histogram(const CorrelationHistogram& hist) {
  std::vector<CorrelationPoint> out;
  out.reserve(hist.size());
  const auto g2 = hist.normalized();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double ref = hist.normalization > 0.0 ? hist.normalization : hist.uncorrelated[i];
    if (!(ref > 0.0)) continue;
    const double raw = std::max(static_cast<double>(hist.counts[i]), 1.0);
    out.push_back({hist.center(i) * 1e-6, g2[i], std::sqrt(raw) / ref});
  }
  return out;
}

BlinkFitResult fit_auto(std::span<const CorrelationPoint> points, const FitOptions& options) {
  if (points.size() < 8) throw ValidationError("fit_auto needs at least 8 peaks");
  require_valid_points(points);
  for (const auto& p : points) {
    if (p.tau_us == 0.0) throw ValidationError("fit_auto: the central peak must be excluded");
  }

  std::vector<double> x, y, s;
  for (const auto& p : points) {
    x.push_back(std::abs(p.tau_us));
    y.push_back(p.g2 - 1.0);
    s.push_back(p.sigma);
  }
  const auto [min_x, max_x] = std::minmax_element(x.begin(), x.end());
  const double span = *max_x - *min_x;
  LogLinear guess = log_linear_fit(x, y, s);
  if (guess.amplitude <= 0.0 || !std::isfinite(guess.amplitude)) {
    throw NumericalError("no bunching detected");
  }
  if (!guess.ok) {
    guess.rate = 3.0 / std::max(span, 1e-12);
    guess.amplitude = std::max(*std::max_element(y.begin(), y.end()), 1e-3);
  }
  if (span * guess.rate < 1.0) {
    throw ValidationError("fit_auto: peaks span less than one decay constant");
  }

  // Parameters (amplitude = 1 / beta, gamma_b).
  auto fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double at = x[i];
      const double e = std::exp(-p(1) * at);
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = (1.0 + p(0) * e - points[i].g2) / s[i];
      if (jac != nullptr) {
        (*jac)(row, 0) = e / s[i];
        (*jac)(row, 1) = -p(0) * at * e / s[i];
      }
    }
  };
  const auto ls = damped_least_squares(fn, Eigen::Vector2d(guess.amplitude, guess.rate),
                                       static_cast<int>(points.size()), ls_options(options));
  const double a = ls.parameters(0);
  if (!ls.converged) {
    Eigen::VectorXd last(2);
    last << 1.0 / a, ls.parameters(1);
    throw FitConvergenceError("fit_auto did not converge", last, ls.iterations);
  }
  if (!(a > 0.0)) throw NumericalError("no bunching detected");
  if (!(ls.parameters(1) > 0.0)) throw NumericalError("fit_auto: fitted blinking rate is not positive");

  BlinkFitResult r;
  r.model = ModelId::kAuto;
  r.beta = 1.0 / a;
  r.gamma_b = ls.parameters(1);
  Eigen::Matrix2d to_beta = Eigen::Matrix2d::Identity();
  to_beta(0, 0) = -1.0 / (a * a);
  r.covariance = to_beta * (ls.covariance() * covariance_scale(ls)) * to_beta.transpose();
  r.beta_err = std::sqrt(std::max(0.0, r.covariance(0, 0)));
  r.gamma_b_err = std::sqrt(std::max(0.0, r.covariance(1, 1)));
  fill_rates(r, options.p_xx);
  fill_fit_stats(r, ls);
  fill_window(r, points);
  return r;
}

BlinkFitResult fit_auto(const PulseBinned& binned, const FitOptions& options) {
  const auto points = points_from_peaks(binned, options.min_pulse_index);
  return fit_auto(std::span<const CorrelationPoint>(points), options);
}

BlinkFitResult fit_cross(std::span<const CorrelationPoint> points, const FitOptions& options) {
  if (points.size() < 8) throw ValidationError("fit_cross needs at least 8 points");
  require_valid_points(points);

  double spacing_neg = std::numeric_limits<double>::infinity();
  double spacing_pos = std::numeric_limits<double>::infinity();
  std::vector<double> x, y, s;
  double max_abs = 0.0;
  for (const auto& p : points) {
    if (p.tau_us > 0.0) spacing_pos = std::min(spacing_pos, p.tau_us);
    if (p.tau_us < 0.0) spacing_neg = std::min(spacing_neg, -p.tau_us);
    max_abs = std::max(max_abs, std::abs(p.tau_us));
    if (p.tau_us != 0.0) {
      x.push_back(std::abs(p.tau_us));
      y.push_back(1.0 - p.g2);
      s.push_back(p.sigma);
    }
  }
  LogLinear guess = log_linear_fit(x, y, s);
  const double gamma0 = guess.ok ? guess.rate : 3.0 / std::max(max_abs, 1e-12);
  if (max_abs * gamma0 < 5.0) {
    throw ValidationError("fit_cross: histogram does not span 5 / gamma_b");
  }

  const double ln1000 = std::log(1000.0);
  const double bound_x = std::isfinite(spacing_neg) ? spacing_neg / ln1000 : 0.0;
  const double bound_xp = std::isfinite(spacing_pos) ? spacing_pos / ln1000 : 0.0;
  CrossParams which{std::isfinite(spacing_neg), std::isfinite(spacing_pos)};
  const double tx0 = std::isfinite(spacing_neg) ? spacing_neg : 1.0;
  const double txp0 = std::isfinite(spacing_pos) ? spacing_pos : 1.0;

  auto unresolved = [&](const Eigen::VectorXd& p, CrossParams w) {
    CrossParams keep = w;
    int k = 1;
    if (w.free_x && !(std::exp(p(k++)) >= bound_x)) keep.free_x = false;
    if (w.free_xp && !(std::exp(p(k++)) >= bound_xp)) keep.free_xp = false;
    return keep;
  };

  LeastSquaresResult ls = run_cross(points, gamma0, tx0, txp0, which, options);
  CrossParams resolved = unresolved(ls.parameters, which);
  if (!ls.converged && resolved.free_x == which.free_x && resolved.free_xp == which.free_xp) {
    throw FitConvergenceError("fit_cross did not converge", ls.parameters.array().exp(),
                              ls.iterations);
  }
  if (resolved.free_x != which.free_x || resolved.free_xp != which.free_xp) {
    double tx = tx0, txp = txp0;
    int k = 1;
    if (which.free_x) tx = std::exp(ls.parameters(k++));
    if (which.free_xp) txp = std::exp(ls.parameters(k++));
    const double g = std::exp(ls.parameters(0));
    which = resolved;
    ls = run_cross(points, std::isfinite(g) && g > 0 ? g : gamma0, tx, txp, which, options);
    if (!ls.converged) {
      throw FitConvergenceError("fit_cross did not converge", ls.parameters.array().exp(),
                                ls.iterations);
    }
  }

  const Eigen::MatrixXd cov = ls.covariance() * covariance_scale(ls);
  BlinkFitResult r;
  r.model = ModelId::kCross;
  r.gamma_b = std::exp(ls.parameters(0));
  r.gamma_b_err = r.gamma_b * std::sqrt(std::max(0.0, cov(0, 0)));
  int k = 1;
  if (which.free_x) {
    r.tau_rec_x = std::exp(ls.parameters(k));
    r.tau_rec_x_err = r.tau_rec_x * std::sqrt(std::max(0.0, cov(k, k)));
    ++k;
  } else {
    r.tau_rec_x = bound_x;
    r.tau_rec_x_upper_bound = true;
  }
  if (which.free_xp) {
    r.tau_rec_xp = std::exp(ls.parameters(k));
    r.tau_rec_xp_err = r.tau_rec_xp * std::sqrt(std::max(0.0, cov(k, k)));
  } else {
    r.tau_rec_xp = bound_xp;
    r.tau_rec_xp_upper_bound = true;
  }
  r.covariance(1, 1) = r.gamma_b_err * r.gamma_b_err;
  if (options.beta_for_cross && *options.beta_for_cross > 0.0) {
    r.beta = *options.beta_for_cross;
    r.beta_err = options.beta_err_for_cross;
    r.covariance(0, 0) = r.beta_err * r.beta_err;
    fill_rates(r, options.p_xx);
  } else {
    r.beta = r.beta_err = kNaN;
    r.gamma_gc = r.gamma_cg = r.gamma_gc_err = r.gamma_cg_err = r.gamma_diff_err = kNaN;
    r.eta_ex = r.eta_ex_err = kNaN;
  }
  fill_fit_stats(r, ls);
  fill_window(r, points);
  return r;
}

BlinkFitResult fit_cross(const PulseBinned& binned, const FitOptions& options) {
  std::vector<CorrelationPoint> points;
  for (const auto& p : binned.peaks) points.push_back({p.tau_ps * 1e-6, p.g2, p.sigma});
  return fit_cross(std::span<const CorrelationPoint>(points), options);
}

double normalized_intensity(double n_mix, double n_gate, double n_tp) {
  if (!(n_tp > 0.0)) throw ValidationError("normalized_intensity: n_tp must be > 0");
  return (n_mix - n_gate) / n_tp;
}

SaturationFit fit_saturation(std::span<const SaturationPoint> points, int max_iterations) {
  if (points.size() < 5) throw ValidationError("fit_saturation needs at least 5 points");
  std::set<double> powers;
  double p_min = std::numeric_limits<double>::infinity(), p_max = 0.0;
  for (const auto& p : points) {
    if (!(p.power_nw >= 0.0) || !std::isfinite(p.value) || !(p.sigma > 0.0)) {
      throw ValidationError("fit_saturation: powers must be >= 0, sigma > 0");
    }
    powers.insert(p.power_nw);
    if (p.power_nw > 0.0) p_min = std::min(p_min, p.power_nw);
    p_max = std::max(p_max, p.power_nw);
  }
  if (powers.size() != points.size()) throw ValidationError("fit_saturation: powers must be distinct");
  if (!(p_max > 0.0)) throw ValidationError("fit_saturation: needs a positive power");

  const auto n = static_cast<Eigen::Index>(points.size());
  // For fixed p_sat the model is linear in (offset, plateau).
  struct Linear {
    Eigen::Vector2d coef;
    Eigen::Matrix2d cov;
    double chi2;
  };
  auto linear_fit = [&](double p_sat) {
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      A(i, 0) = 1.0 / p.sigma;
      A(i, 1) = p.power_nw / (p.power_nw + p_sat) / p.sigma;
      b(i) = p.value / p.sigma;
    }
    Linear out;
    const Eigen::Matrix2d ata = A.transpose() * A;
    out.coef = ata.ldlt().solve(A.transpose() * b);
    out.chi2 = (A * out.coef - b).squaredNorm();
    out.cov = ata.inverse();
    return out;
  };

  double best_p = p_max;
  Linear best = linear_fit(best_p);
  const double lo = std::log(p_min / 100.0), hi = std::log(p_max * 100.0);
  for (int i = 0; i <= 400; ++i) {
    const double p = std::exp(lo + (hi - lo) * i / 400.0);
    const Linear cand = linear_fit(p);
    if (cand.chi2 < best.chi2) {
      best = cand;
      best_p = p;
    }
  }

  SaturationFit out;
  const double dof = static_cast<double>(n) - 3.0;
  const double scale = dof > 0 && best.chi2 > 0 ? best.chi2 / dof : 1.0;
  const double plateau_err = std::sqrt(best.cov(1, 1) * scale);
  const double level = std::abs(best.coef(0)) + std::abs(best.coef(1));
  if (std::abs(best.coef(1)) <= 1e-9 * std::max(level, 1e-300) ||
      (best.chi2 > 0 && std::abs(best.coef(1)) < 2.0 * plateau_err)) {
    // Flat data: a constant fits, p_sat carries no information.
    double sw = 0, swy = 0;
    for (const auto& p : points) {
      sw += 1.0 / (p.sigma * p.sigma);
      swy += p.value / (p.sigma * p.sigma);
    }
    out.offset = swy / sw;
    out.offset_err = std::sqrt(1.0 / sw);
    out.plateau = 0.0;
    out.plateau_err = plateau_err;
    out.p_sat = kNaN;
    out.p_sat_err = kNaN;
    out.identifiable = false;
    double chi2 = 0;
    for (const auto& p : points) chi2 += std::pow((p.value - out.offset) / p.sigma, 2);
    out.chi2_per_dof = chi2 / (static_cast<double>(n) - 1.0);
    return out;
  }

  auto fn = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const double p_sat = std::exp(q(2));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      const double frac = p.power_nw / (p.power_nw + p_sat);
      r(i) = (q(0) + q(1) * frac - p.value) / p.sigma;
      if (jac != nullptr) {
        (*jac)(i, 0) = 1.0 / p.sigma;
        (*jac)(i, 1) = frac / p.sigma;
        // d frac / d ln p_sat = -P p_sat / (P + p_sat)^2
        (*jac)(i, 2) = -q(1) * p.power_nw * p_sat / std::pow(p.power_nw + p_sat, 2) / p.sigma;
      }
    }
  };
  LeastSquaresOptions ls_opt;
  ls_opt.max_iterations = max_iterations;
  const auto ls = damped_least_squares(fn, Eigen::Vector3d(best.coef(0), best.coef(1), std::log(best_p)),
                                       static_cast<int>(n), ls_opt);
  if (!ls.converged) {
    Eigen::VectorXd last = ls.parameters;
    last(2) = std::exp(last(2));
    throw FitConvergenceError("fit_saturation did not converge", last, ls.iterations);
  }
  const Eigen::MatrixXd cov = ls.covariance() * (ls.dof() > 0 && ls.chi2 > 0 ? ls.chi2 / ls.dof() : 1.0);
  out.offset = ls.parameters(0);
  out.offset_err = std::sqrt(std::max(0.0, cov(0, 0)));
  out.plateau = ls.parameters(1);
  out.plateau_err = std::sqrt(std::max(0.0, cov(1, 1)));
  out.p_sat = std::exp(ls.parameters(2));
  out.p_sat_err = out.p_sat * std::sqrt(std::max(0.0, cov(2, 2)));
  out.chi2_per_dof = ls.dof() > 0 ? ls.chi2 / ls.dof() : 0.0;
  out.iterations = ls.iterations;
  return out;
}

std::pair<double, double> intensity_ratios(double n_x, double n_xplus) {
  if (!(n_x >= 0.0) || !(n_xplus >= 0.0)) {
    throw ValidationError("intensity_ratios: counts must be >= 0");
  }
  const double total = n_x + n_xplus;
  if (!(total > 0.0)) throw ValidationError("intensity_ratios: both counts are zero");
  const double r_x = n_x / total;
  return {r_x, 1.0 - r_x};
}

SweepTable sweep_analysis(std::span<const SweepInput> inputs, const SweepOptions& options) {
  if (inputs.empty()) throw ValidationError("sweep_analysis: no labels");
  {
    std::set<double> labels;
    for (const auto& in : inputs) {
      if (!labels.insert(in.label).second) {
        throw ValidationError("sweep_analysis: duplicate label " + std::to_string(in.label));
      }
    }
  }

  SweepTable table;
  table.rows.resize(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      SweepRow& row = table.rows[i];
      row.label = inputs[i].label;
      try {
        const std::span<const CorrelationPoint> pts(inputs[i].points);
        row.fit = options.model == ModelId::kAuto ? fit_auto(pts, options.fit)
                                                  : fit_cross(pts, options.fit);
      } catch (const Error& e) {
        row.error = e.what();
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(inputs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  const SweepRow* prev = nullptr;
  for (const auto& row : table.rows) {
    if (!row.fit || !std::isfinite(row.fit->gamma_gc)) continue;
    const double d = row.fit->gamma_gc - row.fit->gamma_cg;
    if (std::abs(d) < 2.0 * row.fit->gamma_diff_err) table.balanced_labels.push_back(row.label);
    if (prev != nullptr) {
      const double d_prev = prev->fit->gamma_gc - prev->fit->gamma_cg;
      if ((d_prev < 0.0 && d > 0.0) || (d_prev > 0.0 && d < 0.0) || d == 0.0) {
        SweepCrossing c;
        c.lower_label = prev->label;
        c.upper_label = row.label;
        c.label = prev->label + (row.label - prev->label) * d_prev / (d_prev - d);
        table.crossings.push_back(c);
      }
    } else if (d == 0.0) {
      table.crossings.push_back({row.label, row.label, row.label});
    }
    prev = &row;
  }
  return table;
}

RunsTest runs_test(std::span<const double> residuals) {
  RunsTest out;
  int last = 0;
  for (double r : residuals) {
    if (r == 0.0 || !std::isfinite(r)) continue;
    const int sign = r > 0.0 ? 1 : -1;
    (sign > 0 ? out.n_positive : out.n_negative)++;
    if (sign != last) ++out.runs;
    last = sign;
  }
  const double n1 = static_cast<double>(out.n_positive);
  const double n2 = static_cast<double>(out.n_negative);
  const double n = n1 + n2;
  if (n < 2) return out;
  if (n1 == 0 || n2 == 0) {
    out.p_value = std::pow(0.5, n - 1.0);
    return out;
  }
  const double mean = 2.0 * n1 * n2 / n + 1.0;
  const double var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
  out.z = var > 0.0 ? (static_cast<double>(out.runs) - mean) / std::sqrt(var) : 0.0;
  out.p_value = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  return out;
}

}  // namespace qdb
