#ifndef QDBLINK_TOMOGRAPHY_HPP
#define QDBLINK_TOMOGRAPHY_HPP

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qdblink/error.hpp"

namespace qdb {

// Two-photon polarization states in the product basis {HH, HV, VH, VV}.
template <typename Scalar>
using DensityMatrix4T = Eigen::Matrix<std::complex<Scalar>, 4, 4>;
template <typename Scalar>
using Ket4T = Eigen::Matrix<std::complex<Scalar>, 4, 1>;

using DensityMatrix4 = DensityMatrix4T<double>;
using Ket4 = Ket4T<double>;

enum class Polarization : std::uint8_t { kH, kV, kD, kA, kR, kL };

char polarization_symbol(Polarization p);

/// Analyzer basis for each photon of the pair.
struct ProjectorSetting {
  Polarization first = Polarization::kH;
  Polarization second = Polarization::kH;

  std::string label() const;
  static std::optional<ProjectorSetting> parse(std::string_view label);

  bool operator==(const ProjectorSetting&) const = default;
};

/// The standard 16-setting informationally complete set
/// (HH HV VV VH RH RV DV DH DR DD RD HD VD VL HL RL).
const std::vector<ProjectorSetting>& canonical_settings();
/// All 36 combinations of {H, V, D, A, R, L}.
const std::vector<ProjectorSetting>& full_settings();
bool is_canonical(const ProjectorSetting& setting);

struct CoincidenceRecord {
  ProjectorSetting setting;
  std::int64_t counts = 0;
  double acquisition_time_s = 1.0;
};

/// Single-photon analyzer state. D=(H+V)/sqrt2, A=(H-V)/sqrt2,
/// R=(H+iV)/sqrt2, L=(H-iV)/sqrt2.
template <typename Scalar = double>
Eigen::Matrix<std::complex<Scalar>, 2, 1> polarization_ket(Polarization p) {
  using C = std::complex<Scalar>;
  const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
  Eigen::Matrix<C, 2, 1> k;
  switch (p) {
    case Polarization::kH: k << C(1), C(0); break;
    case Polarization::kV: k << C(0), C(1); break;
    case Polarization::kD: k << C(s), C(s); break;
    case Polarization::kA: k << C(s), C(-s); break;
    case Polarization::kR: k << C(s), C(0, s); break;
    case Polarization::kL: k << C(s), C(0, -s); break;
  }
  return k;
}

/// Rank-1 projector |psi1><psi1| (x) |psi2><psi2|.
template <typename Scalar = double>
DensityMatrix4T<Scalar> projector(const ProjectorSetting& setting) {
  const auto a = polarization_ket<Scalar>(setting.first);
  const auto b = polarization_ket<Scalar>(setting.second);
  Ket4T<Scalar> ket;
  ket << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return ket * ket.adjoint();
}

/// (|HH> + |VV>) / sqrt2
Ket4 phi_plus();
DensityMatrix4 pure_state(const Ket4& ket);
/// p |Phi+><Phi+| + (1 - p) I/4
DensityMatrix4 werner_state(double p);
DensityMatrix4 maximally_mixed();

struct PhysicalityReport {
  double hermiticity_error = 0.0;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;

  bool is_physical(double hermitian_tol = 1e-12, double trace_tol = 1e-12,
                   double eigen_tol = 1e-9) const {
    return hermiticity_error <= hermitian_tol && trace_error <= trace_tol &&
           min_eigenvalue >= -eigen_tol;
  }
};

PhysicalityReport check_physical(const DensityMatrix4& rho);
double min_eigenvalue(const DensityMatrix4& rho);

/// Probability tr(rho P) of a setting.
double expected_probability(const DensityMatrix4& rho, const ProjectorSetting& setting);

/// Clips negative eigenvalues to zero and renormalizes the trace.
DensityMatrix4 physicalize(const DensityMatrix4& rho);

struct LinearEstimate {
  DensityMatrix4 rho;
  double min_eigenvalue = 0.0;
  bool negative = false;  // min eigenvalue < -1e-6
};

/// Linear inversion of count rates n_i / t_i = tr(M P_i) for an unnormalized
/// Hermitian M, solved in the Pauli-product basis (least squares when the
/// settings are over-complete). Throws ValidationError when the settings do
/// not determine the state.
LinearEstimate linear_reconstruct(std::span<const CoincidenceRecord> records);

/// Throws ValidationError naming the missing canonical settings when the
/// records are not informationally complete.
void require_informationally_complete(std::span<const CoincidenceRecord> records);

struct MleOptions {
  double tol = 1e-10;  // relative log-likelihood step
  int max_iterations = 10000;
};

struct MleResult {
  DensityMatrix4 rho;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> likelihood_trace;
};

class MleConvergenceError : public NumericalError {
 public:
  MleConvergenceError(const std::string& what, MleResult last)
      : NumericalError(what), last_(std::move(last)) {}
  const MleResult& last_iterate() const { return last_; }

 private:
  MleResult last_;
};

/// Poisson maximum-likelihood state over rho = T^dag T / tr(T^dag T), with T
/// lower triangular. Gradient ascent with backtracking from the physicalized
/// linear estimate.
MleResult mle_reconstruct(std::span<const CoincidenceRecord> records,
                          const MleOptions& options = {});

/// Poisson log-likelihood sum n_i ln mu_i - mu_i with mu_i = t_i tr(M P_i),
/// maximized over the overall scale of M.
double log_likelihood(const DensityMatrix4& rho, std::span<const CoincidenceRecord> records);

/// <target|rho|target>; throws ValidationError if the imaginary part exceeds 1e-10.
double fidelity(const DensityMatrix4& rho, const Ket4& target = phi_plus());
double trace_distance(const DensityMatrix4& a, const DensityMatrix4& b);

struct ResampleOptions {
  int n_resamples = 200;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  MleOptions mle;
};

struct ResampleSummary {
  double fidelity_mean = 0.0;
  double fidelity_sigma = 0.0;
  int used = 0;
  int dropped = 0;
  double drop_rate() const { return used + dropped > 0 ? double(dropped) / (used + dropped) : 0.0; }
};

/// Poisson bootstrap of the MLE fidelity to |Phi+>.
ResampleSummary resample_errors(std::span<const CoincidenceRecord> records,
                                const ResampleOptions& options);

}  // namespace qdb

#endif  // QDBLINK_TOMOGRAPHY_HPP
