#include "qdblink/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>

#include "qdblink/error.hpp"

namespace qdb {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    boost::algorithm::trim(cell);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Restores the stream precision on scope exit.
class Precision {
 public:
  Precision(std::ostream& os, int digits) : os_(os), saved_(os.precision(digits)) {}
  ~Precision() { os_.precision(saved_); }

 private:
  std::ostream& os_;
  std::streamsize saved_;
};

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

int CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int CsvTable::require(std::string_view name) const {
  const int c = column(name);
  if (c < 0) throw ValidationError("CSV is missing the column '" + std::string(name) + "'");
  return c;
}

double CsvTable::number(std::size_t row, int col) const {
  const std::string& s = rows.at(row).at(static_cast<std::size_t>(col));
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("CSV row " + std::to_string(row + 1) + ", column '" +
                          header[static_cast<std::size_t>(col)] + "': not a number: '" + s + "'");
  }
  return v;
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ValidationError("CSV line " + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ValidationError("CSV has no header");
  return t;
}

void write_histogram_csv(std::ostream& out, const CorrelationHistogram& hist) {
  Precision guard(out, 12);
  const auto norm = hist.normalized();
  out << "bin_center_ps,counts,normalized";
  if (hist.log_spaced) out << ",bin_width_ps";
  out << '\n';
  for (std::size_t i = 0; i < hist.size(); ++i) {
    out << hist.center(i) << ',' << hist.counts[i] << ',' << norm[i];
    if (hist.log_spaced) out << ',' << hist.width(i);
    out << '\n';
  }
}

std::vector<CorrelationPoint> read_histogram_points(std::istream& in, bool exclude_zero) {
  const auto t = read_csv(in);
  const int c_center = t.require("bin_center_ps");
  const int c_counts = t.require("counts");
  const int c_norm = t.require("normalized");
  const int c_width = t.column("bin_width_ps");

  const std::size_t n = t.rows.size();
  std::vector<double> center(n), counts(n), norm(n), width(n, 0.0);
  double sum_counts = 0.0, sum_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    center[i] = t.number(i, c_center);
    counts[i] = t.number(i, c_counts);
    norm[i] = t.number(i, c_norm);
    if (c_width >= 0) width[i] = t.number(i, c_width);
    sum_counts += counts[i];
    sum_norm += norm[i];
  }
  if (c_width < 0 && n > 1) {
    const double w = (center.back() - center.front()) / static_cast<double>(n - 1);
    std::fill(width.begin(), width.end(), w);
  }
  if (!(sum_counts > 0.0)) throw ValidationError("histogram CSV holds no coincidences");
  const double fallback = sum_norm / sum_counts;

  std::vector<CorrelationPoint> points;
  for (std::size_t i = 0; i < n; ++i) {
    if (exclude_zero && std::abs(center[i]) < 0.5 * width[i]) continue;
    const double ratio = counts[i] > 0.0 ? norm[i] / counts[i] : fallback;
    points.push_back({center[i] * 1e-6, norm[i], std::sqrt(std::max(counts[i], 1.0)) * ratio});
  }
  return points;
}

std::vector<SaturationPoint> read_saturation_csv(std::istream& in) {
  const auto t = read_csv(in);
  const int c_power = t.require("power_nw");
  const int c_value = t.require("value");
  const int c_sigma = t.column("sigma");
  std::vector<SaturationPoint> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({t.number(i, c_power), t.number(i, c_value),
                   c_sigma >= 0 ? t.number(i, c_sigma) : 1.0});
  }
  return out;
}

std::vector<CoincidenceRecord> read_tomo_counts_csv(std::istream& in) {
  const auto t = read_csv(in);
  const int c_setting = t.require("setting");
  const int c_counts = t.require("counts");
  const int c_time = t.column("acquisition_time_s");
  std::vector<CoincidenceRecord> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& label = t.rows[i][static_cast<std::size_t>(c_setting)];
    const auto setting = ProjectorSetting::parse(label);
    if (!setting) throw ValidationError("unknown analyzer setting '" + label + "'");
    const double counts = t.number(i, c_counts);
    if (counts < 0.0 || counts != std::floor(counts)) {
      throw ValidationError("counts for setting " + label + " must be a non-negative integer");
    }
    const double time = c_time >= 0 ? t.number(i, c_time) : 1.0;
    if (!(time > 0.0)) throw ValidationError("acquisition time for " + label + " must be > 0");
    out.push_back({*setting, static_cast<std::int64_t>(counts), time});
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "label,beta,beta_err,gamma_b,gamma_b_err,gamma_gc,gamma_cg,eta_ex,chi2_per_dof,error\n";
  for (const auto& row : table.rows) {
    out << cell(row.label);
    if (row.fit) {
      const auto& f = *row.fit;
      for (double v : {f.beta, f.beta_err, f.gamma_b, f.gamma_b_err, f.gamma_gc, f.gamma_cg,
                       f.eta_ex, f.chi2_per_dof}) {
        out << ',' << cell(v);
      }
      out << ",\n";
    } else {
      std::string message = row.error;
      std::replace(message.begin(), message.end(), ',', ';');
      out << ",,,,,,,,," << message << '\n';
    }
  }
}

void write_delay_matrix_csv(std::ostream& out, std::span<const double> labels,
                            std::span<const PulseBinned> binned) {
  if (labels.size() != binned.size()) {
    throw ValidationError("delay matrix: one histogram per label is required");
  }
  std::map<std::int64_t, double> delays;  // pulse index -> tau_us
  for (const auto& b : binned) {
    for (const auto& p : b.peaks) delays.emplace(p.pulse_index, p.tau_ps * 1e-6);
  }
  out << "label";
  for (const auto& [k, tau] : delays) out << ',' << cell(tau);
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::map<std::int64_t, double> row;
    for (const auto& p : binned[i].peaks) row[p.pulse_index] = p.g2;
    out << cell(labels[i]);
    for (const auto& [k, tau] : delays) {
      out << ',';
      if (const auto it = row.find(k); it != row.end()) out << cell(it->second);
    }
    out << '\n';
  }
}

void write_density_matrix_csv(std::ostream& out, const DensityMatrix4& rho) {
  out << "row,col,real,imag\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out << r << ',' << c << ',' << cell(rho(r, c).real()) << ',' << cell(rho(r, c).imag())
          << '\n';
    }
  }
}

void write_fit_report(std::ostream& out, const BlinkFitResult& f) {
  Precision guard(out, 6);
  out << "model            " << model_name(f.model) << '\n'
      << "points           " << f.n_points << "  (|tau| " << f.window_min_us << " .. "
      << f.window_max_us << " us)\n"
      << "gamma_b          " << f.gamma_b << " +/- " << f.gamma_b_err << " 1/us\n";
  if (!std::isnan(f.beta)) {
    out << "beta             " << f.beta << " +/- " << f.beta_err << '\n'
        << "gamma_gc         " << f.gamma_gc << " +/- " << f.gamma_gc_err << " 1/us\n"
        << "gamma_cg         " << f.gamma_cg << " +/- " << f.gamma_cg_err << " 1/us\n"
        << "eta_ex           " << f.eta_ex << " +/- " << f.eta_ex_err << '\n';
  }
  if (f.model == ModelId::kAuto) out << "g2(0) extrap.    " << f.g2_at_zero() << '\n';
  if (f.model == ModelId::kCross) {
    auto recovery = [&](const char* name, double v, double err, bool bound) {
      out << name << (bound ? "< " : "") << v;
      if (!bound) out << " +/- " << err;
      out << " us\n";
    };
    recovery("tau_rec_x        ", f.tau_rec_x, f.tau_rec_x_err, f.tau_rec_x_upper_bound);
    recovery("tau_rec_xplus    ", f.tau_rec_xp, f.tau_rec_xp_err, f.tau_rec_xp_upper_bound);
  }
  out << "chi2/dof         " << f.chi2_per_dof << "  (dof " << f.dof << ", " << f.iterations
      << " iterations)\n";
}

void write_fit_csv(std::ostream& out, const BlinkFitResult& f) {
  out << "model,beta,beta_err,gamma_b,gamma_b_err,gamma_gc,gamma_gc_err,gamma_cg,gamma_cg_err,"
         "eta_ex,eta_ex_err,tau_rec_x,tau_rec_xplus,chi2_per_dof,dof,n_points\n";
  out << model_name(f.model);
  for (double v : {f.beta, f.beta_err, f.gamma_b, f.gamma_b_err, f.gamma_gc, f.gamma_gc_err,
                   f.gamma_cg, f.gamma_cg_err, f.eta_ex, f.eta_ex_err}) {
    out << ',' << cell(v);
  }
  const bool cross = f.model == ModelId::kCross;
  out << ',' << (cross ? cell(f.tau_rec_x) : "") << ',' << (cross ? cell(f.tau_rec_xp) : "")
      << ',' << cell(f.chi2_per_dof) << ',' << f.dof << ',' << f.n_points << '\n';
}

void write_saturation_report(std::ostream& out, const SaturationFit& f) {
  Precision guard(out, 6);
  out << "model            saturation\n"
      << "offset           " << f.offset << " +/- " << f.offset_err << '\n'
      << "plateau          " << f.plateau << " +/- " << f.plateau_err << '\n'
      << "saturated level  " << f.saturated_level() << '\n';
  if (f.identifiable) {
    out << "p_sat            " << f.p_sat << " +/- " << f.p_sat_err << " nW\n";
  } else {
    out << "p_sat            not identifiable (no saturating response)\n";
  }
  out << "chi2/dof         " << f.chi2_per_dof << "  (" << f.iterations << " iterations)\n";
}

void write_saturation_csv(std::ostream& out, const SaturationFit& f) {
  out << "offset,offset_err,plateau,plateau_err,p_sat,p_sat_err,identifiable,chi2_per_dof\n";
  out << cell(f.offset) << ',' << cell(f.offset_err) << ',' << cell(f.plateau) << ','
      << cell(f.plateau_err) << ',' << cell(f.p_sat) << ',' << cell(f.p_sat_err) << ','
      << (f.identifiable ? 1 : 0) << ',' << cell(f.chi2_per_dof) << '\n';
}

}  // namespace qdb
