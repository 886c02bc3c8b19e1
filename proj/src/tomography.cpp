#include "qdblink/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace qdb {
namespace {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

std::vector<ProjectorSetting> make_settings(std::string_view labels) {
  std::vector<ProjectorSetting> out;
  std::istringstream in{std::string(labels)};
  std::string token;
  while (in >> token) out.push_back(*ProjectorSetting::parse(token));
  return out;
}

std::array<Matrix2c, 4> pauli() {
  std::array<Matrix2c, 4> p;
  p[0] << 1, 0, 0, 1;
  p[1] << 0, 1, 1, 0;
  p[2] << 0, Complex(0, -1), Complex(0, 1), 0;
  p[3] << 1, 0, 0, -1;
  return p;
}

// Pauli products sigma_i (x) sigma_j, k = 4 i + j.
const std::array<DensityMatrix4, 16>& pauli_basis() {
  static const std::array<DensityMatrix4, 16> basis = [] {
    std::array<DensityMatrix4, 16> b;
    const auto p = pauli();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        DensityMatrix4 m;
        for (int r = 0; r < 2; ++r) {
          for (int c = 0; c < 2; ++c) m.block<2, 2>(2 * r, 2 * c) = p[i](r, c) * p[j];
        }
        b[4 * i + j] = m;
      }
    }
    return b;
  }();
  return basis;
}

Ket4 setting_ket(const ProjectorSetting& s) {
  const auto a = polarization_ket(s.first);
  const auto b = polarization_ket(s.second);
  Ket4 k;
  k << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return k;
}

Eigen::MatrixXd design_matrix(std::span<const CoincidenceRecord> records) {
  const auto& basis = pauli_basis();
  Eigen::MatrixXd a(records.size(), 16);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DensityMatrix4 proj = projector(records[i].setting);
    for (int k = 0; k < 16; ++k) a(i, k) = (basis[k] * proj).trace().real();
  }
  return a;
}

DensityMatrix4 hermitize(const DensityMatrix4& m) { return 0.5 * (m + m.adjoint()); }

void check_records(std::span<const CoincidenceRecord> records) {
  for (const auto& r : records) {
    if (r.counts < 0) throw ValidationError("tomography: negative coincidence count");
    if (!(r.acquisition_time_s > 0.0)) {
      throw ValidationError("tomography: acquisition time must be > 0");
    }
  }
}

// Lower-triangular T with T^dag T = m (m positive definite).
DensityMatrix4 lower_factor(const DensityMatrix4& m) {
  DensityMatrix4 flip = DensityMatrix4::Zero();
  for (int i = 0; i < 4; ++i) flip(i, 3 - i) = 1.0;
  Eigen::LLT<DensityMatrix4> llt(flip * m * flip);
  if (llt.info() != Eigen::Success) throw NumericalError("mle: seed is not positive definite");
  const DensityMatrix4 l = llt.matrixL();
  return (flip * l * flip).adjoint();
}

struct LikelihoodModel {
  std::vector<Ket4> kets;
  std::vector<double> counts;
  std::vector<double> times;

  // Poisson log-likelihood of the unnormalized M = T^dag T.
  double value(const DensityMatrix4& t) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < kets.size(); ++i) {
      const double mu = times[i] * (t * kets[i]).squaredNorm();
      if (mu <= 0.0) {
        if (counts[i] > 0.0) return -std::numeric_limits<double>::infinity();
        continue;
      }
      sum += counts[i] * std::log(mu) - mu;
    }
    return sum;
  }

  // dL/dT restricted to lower-triangular entries with real diagonal.
  DensityMatrix4 gradient(const DensityMatrix4& t) const {
    DensityMatrix4 r = DensityMatrix4::Zero();
    for (std::size_t i = 0; i < kets.size(); ++i) {
      const double mu = times[i] * (t * kets[i]).squaredNorm();
      const double w = (mu > 0.0 ? counts[i] / mu : 0.0) - 1.0;
      r += (w * times[i]) * (kets[i] * kets[i].adjoint());
    }
    DensityMatrix4 g = 2.0 * t * r;
    for (int i = 0; i < 4; ++i) {
      g(i, i) = g(i, i).real();
      for (int j = i + 1; j < 4; ++j) g(i, j) = 0.0;
    }
    return g;
  }
};

DensityMatrix4 normalized(const DensityMatrix4& t) {
  DensityMatrix4 m = hermitize(t.adjoint() * t);
  return m / m.trace().real();
}

}  // namespace

char polarization_symbol(Polarization p) {
  static constexpr char symbols[] = {'H', 'V', 'D', 'A', 'R', 'L'};
  return symbols[static_cast<int>(p)];
}

std::string ProjectorSetting::label() const {
  return {polarization_symbol(first), polarization_symbol(second)};
}

std::optional<ProjectorSetting> ProjectorSetting::parse(std::string_view label) {
  if (label.size() != 2) return std::nullopt;
  auto one = [](char ch) -> std::optional<Polarization> {
    switch (std::toupper(static_cast<unsigned char>(ch))) {
      case 'H': return Polarization::kH;
      case 'V': return Polarization::kV;
      case 'D': return Polarization::kD;
      case 'A': return Polarization::kA;
      case 'R': return Polarization::kR;
      case 'L': return Polarization::kL;
      default: return std::nullopt;
    }
  };
  const auto a = one(label[0]);
  const auto b = one(label[1]);
  if (!a || !b) return std::nullopt;
  return ProjectorSetting{*a, *b};
}

const std::vector<ProjectorSetting>& canonical_settings() {
  static const auto settings =
      make_settings("HH HV VV VH RH RV DV DH DR DD RD HD VD VL HL RL");
  return settings;
}

const std::vector<ProjectorSetting>& full_settings() {
  static const auto settings = [] {
    std::vector<ProjectorSetting> out;
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        out.push_back({static_cast<Polarization>(a), static_cast<Polarization>(b)});
      }
    }
    return out;
  }();
  return settings;
}

bool is_canonical(const ProjectorSetting& setting) {
  const auto& c = canonical_settings();
  return std::find(c.begin(), c.end(), setting) != c.end();
}

Ket4 phi_plus() {
  Ket4 k;
  const double s = 1.0 / std::sqrt(2.0);
  k << s, 0, 0, s;
  return k;
}

DensityMatrix4 pure_state(const Ket4& ket) {
  const Ket4 n = ket.normalized();
  return n * n.adjoint();
}

DensityMatrix4 werner_state(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("werner_state: p must lie in [0, 1]");
  return p * pure_state(phi_plus()) + (1.0 - p) * maximally_mixed();
}

DensityMatrix4 maximally_mixed() { return DensityMatrix4::Identity() / 4.0; }

double min_eigenvalue(const DensityMatrix4& rho) {
  Eigen::SelfAdjointEigenSolver<DensityMatrix4> es(hermitize(rho), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

PhysicalityReport check_physical(const DensityMatrix4& rho) {
  PhysicalityReport r;
  r.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  r.trace_error = std::abs(rho.trace() - Complex(1.0));
  r.min_eigenvalue = min_eigenvalue(rho);
  return r;
}

double expected_probability(const DensityMatrix4& rho, const ProjectorSetting& setting) {
  const Ket4 k = setting_ket(setting);
  return (k.adjoint() * rho * k)(0).real();
}

DensityMatrix4 physicalize(const DensityMatrix4& rho) {
  Eigen::SelfAdjointEigenSolver<DensityMatrix4> es(hermitize(rho));
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  const double sum = ev.sum();
  if (!(sum > 0.0)) throw NumericalError("physicalize: no positive eigenvalues");
  ev /= sum;
  return hermitize(es.eigenvectors() * ev.cast<Complex>().asDiagonal() *
                   es.eigenvectors().adjoint());
}

void require_informationally_complete(std::span<const CoincidenceRecord> records) {
  const Eigen::MatrixXd a = design_matrix(records);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (records.size() >= 16 && lu.rank() == 16) return;
  std::vector<std::string> missing;
  for (const auto& s : canonical_settings()) {
    const bool present = std::any_of(records.begin(), records.end(),
                                     [&](const auto& r) { return r.setting == s; });
    if (!present) missing.push_back(s.label());
  }
  std::ostringstream msg;
  msg << "tomography: settings are not informationally complete (rank "
      << (records.empty() ? 0 : lu.rank()) << " of 16)";
  if (!missing.empty()) {
    msg << "; missing canonical settings:";
    for (const auto& m : missing) msg << ' ' << m;
  } else {
    msg << "; duplicate settings make the design matrix singular";
  }
  throw ValidationError(msg.str());
}

LinearEstimate linear_reconstruct(std::span<const CoincidenceRecord> records) {
  check_records(records);
  require_informationally_complete(records);
  const double total = std::accumulate(records.begin(), records.end(), 0.0,
                                       [](double s, const auto& r) { return s + r.counts; });
  if (!(total > 0.0)) throw ValidationError("linear_reconstruct: total counts must be > 0");

  const Eigen::MatrixXd a = design_matrix(records);
  Eigen::VectorXd y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    y(i) = records[i].counts / records[i].acquisition_time_s;
  }
  const Eigen::VectorXd m = a.colPivHouseholderQr().solve(y);

  const auto& basis = pauli_basis();
  DensityMatrix4 unnormalized = DensityMatrix4::Zero();
  for (int k = 0; k < 16; ++k) unnormalized += m(k) * basis[k];
  const double tr = unnormalized.trace().real();
  if (!(tr > 0.0)) throw NumericalError("linear_reconstruct: non-positive trace");

  LinearEstimate out;
  out.rho = hermitize(unnormalized / tr);
  out.min_eigenvalue = min_eigenvalue(out.rho);
  out.negative = out.min_eigenvalue < -1e-6;
  return out;
}

double log_likelihood(const DensityMatrix4& rho, std::span<const CoincidenceRecord> records) {
  double counts = 0.0;
  double expected = 0.0;
  for (const auto& r : records) {
    counts += r.counts;
    expected += r.acquisition_time_s * expected_probability(rho, r.setting);
  }
  if (!(expected > 0.0)) return -std::numeric_limits<double>::infinity();
  const double scale = counts / expected;
  double sum = 0.0;
  for (const auto& r : records) {
    const double mu = scale * r.acquisition_time_s * expected_probability(rho, r.setting);
    if (mu <= 0.0) {
      if (r.counts > 0) return -std::numeric_limits<double>::infinity();
      continue;
    }
    sum += r.counts * std::log(mu) - mu;
  }
  return sum;
}

MleResult mle_reconstruct(std::span<const CoincidenceRecord> records, const MleOptions& options) {
  const LinearEstimate linear = linear_reconstruct(records);

  LikelihoodModel model;
  double total_counts = 0.0;
  double expected = 0.0;
  // Small admixture of I/4 keeps the seed strictly inside the cone.
  constexpr double kSeedMixing = 1e-9;
  const DensityMatrix4 seed =
      (1.0 - kSeedMixing) * physicalize(linear.rho) + kSeedMixing * maximally_mixed();
  for (const auto& r : records) {
    model.kets.push_back(setting_ket(r.setting));
    model.counts.push_back(static_cast<double>(r.counts));
    model.times.push_back(r.acquisition_time_s);
    total_counts += r.counts;
    expected += r.acquisition_time_s * expected_probability(seed, r.setting);
  }

  DensityMatrix4 t = lower_factor(seed * (total_counts / expected));
  double value = model.value(t);

  MleResult result;
  result.likelihood_trace.push_back(value);
  double step = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const DensityMatrix4 g = model.gradient(t);
    const double g2 = g.squaredNorm();
    result.iterations = it;
    if (g2 == 0.0) {
      result.converged = true;
      break;
    }
    // Armijo backtracking; the step grows again after each success. The
    // first trial moves T by a tenth of its norm.
    step = step > 0.0 ? 2.0 * step : 0.1 * t.norm() / std::sqrt(g2);
    DensityMatrix4 candidate;
    double candidate_value = -std::numeric_limits<double>::infinity();
    while (true) {
      candidate = t + step * g;
      candidate_value = model.value(candidate);
      if (candidate_value >= value + 1e-4 * step * g2) break;
      step *= 0.5;
      if (step < 1e-300) break;
    }
    if (!(candidate_value >= value)) {
      // No ascent direction left at machine precision.
      result.converged = true;
      break;
    }
    const double gain = candidate_value - value;
    t = candidate;
    value = candidate_value;
    result.likelihood_trace.push_back(value);
    if (gain < options.tol * std::max(1.0, std::abs(value))) {
      result.converged = true;
      break;
    }
  }

  result.rho = normalized(t);
  result.log_likelihood = log_likelihood(result.rho, records);
  if (!result.converged) {
    std::ostringstream msg;
    msg << "mle_reconstruct: no convergence after " << options.max_iterations << " iterations";
    throw MleConvergenceError(msg.str(), std::move(result));
  }
  return result;
}

double fidelity(const DensityMatrix4& rho, const Ket4& target) {
  const Complex f = (target.adjoint() * rho * target)(0);
  if (std::abs(f.imag()) > 1e-10) {
    throw ValidationError("fidelity: density matrix is not Hermitian");
  }
  return f.real();
}

double trace_distance(const DensityMatrix4& a, const DensityMatrix4& b) {
  Eigen::SelfAdjointEigenSolver<DensityMatrix4> es(hermitize(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

ResampleSummary resample_errors(std::span<const CoincidenceRecord> records,
                                const ResampleOptions& options) {
  if (options.n_resamples < 100) {
    throw ValidationError("resample_errors: n_resamples must be >= 100");
  }
  const std::size_t n = static_cast<std::size_t>(options.n_resamples);
  std::vector<double> fidelities(n, std::numeric_limits<double>::quiet_NaN());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      std::seed_seq seq{options.seed, static_cast<std::uint64_t>(k)};
      std::mt19937_64 rng(seq);
      std::vector<CoincidenceRecord> sample(records.begin(), records.end());
      for (auto& r : sample) {
        if (r.counts > 0) {
          r.counts = std::poisson_distribution<std::int64_t>(static_cast<double>(r.counts))(rng);
        }
      }
      try {
        fidelities[k] = fidelity(mle_reconstruct(sample, options.mle).rho);
      } catch (const Error&) {
        // Counted as dropped below.
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, n));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back(work, n * w / threads, n * (w + 1) / threads);
    }
  }

  ResampleSummary out;
  double sum = 0.0;
  double sum2 = 0.0;
  for (double f : fidelities) {
    if (std::isnan(f)) {
      ++out.dropped;
      continue;
    }
    ++out.used;
    sum += f;
    sum2 += f * f;
  }
  if (out.used == 0) throw NumericalError("resample_errors: every resample failed");
  out.fidelity_mean = sum / out.used;
  if (out.used > 1) {
    const double var = (sum2 - out.used * out.fidelity_mean * out.fidelity_mean) / (out.used - 1);
    out.fidelity_sigma = std::sqrt(std::max(0.0, var));
  }
  return out;
}

}  // namespace qdb
