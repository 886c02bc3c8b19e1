#ifndef QDBLINK_DYNAMICS_HPP
#define QDBLINK_DYNAMICS_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "qdblink/error.hpp"

namespace qdb {

// Level scheme of a quantum dot under pulsed two-photon excitation with a
// charge telegraph on the ground state:
//
//   neutral |g> --pulse(p_xx)--> |XX> --gamma_xx--> |X> --gamma_x--> |g>
//   charged |c> --pulse(p_c)---> |X+> --gamma_c--> |c>
//   |g> --gamma_gc--> |c>,  |c> --gamma_cg--> |g>
//
// Radiative rates are in 1/ns, ground-state switching rates in 1/us.
struct RateSet {
  double p_xx = 0.8;
  double gamma_xx_per_ns = 5.0;
  double gamma_x_per_ns = 3.3;
  double gamma_gc_per_us = 0.5;
  double gamma_cg_per_us = 1.0;
  double p_c = 0.5;
  double gamma_c_per_ns = 2.5;
  double gamma_e_d_per_us = 0.0;
  double gamma_h_d_per_us = 0.0;

  // Defect tunneling of holes charges the dot, of electrons neutralizes it.
  double effective_gc_per_us() const { return gamma_gc_per_us + gamma_h_d_per_us; }
  double effective_cg_per_us() const { return gamma_cg_per_us + gamma_e_d_per_us; }

  bool operator==(const RateSet&) const = default;
};

/// Throws ValidationError on negative rates or probabilities outside [0, 1].
void validate(const RateSet& rates);

/// Minimum ratio between the slowest radiative rate and the fastest
/// switching rate for cascades to be treated as uninterrupted.
inline constexpr double kMinRateSeparation = 1e3;

/// Human-readable warnings for soft violations (rate separation).
std::vector<std::string> rate_warnings(const RateSet& rates);

struct GateLaserConfig {
  double wavelength_nm = 738.0;
  double power_nw = 0.0;
  double map_gc_per_nw_us = 0.0;
  double map_cg_per_nw_us = 0.0;
  double sat_power_nw = 200.0;
};

void validate(const GateLaserConfig& gate);

struct SteadyState {
  double p_neutral = 0.0;
  double p_charged = 0.0;
  double beta = 0.0;
  double gamma_b_per_us = 0.0;
  double n_h_st = 0.0;
  double rate_x = 0.0;
  double rate_xx = 0.0;
  double rate_xplus = 0.0;
  double r_x = 0.0;
  double r_xplus = 0.0;
  double eta_ex = 0.0;
};

/// Stationary occupation of the charge telegraph and the expected detected
/// photon rates (counts/s) for a given repetition rate and detector efficiency.
SteadyState steady_state(const RateSet& rates, double rep_rate_hz, double detector_eff);

/// Excitation efficiency p_xx * beta / (1 + beta).
inline double eta_ex_from_beta(double p_xx, double beta) { return p_xx * beta / (1.0 + beta); }

/// Inverse of eta_ex_from_beta.
double beta_from_eta_ex(double p_xx, double eta_ex);

/// Blinking autocorrelation 1 + exp(-gamma_b |tau|) / beta.
template <typename Scalar>
Scalar g2_auto_model(Scalar tau_us, Scalar beta, Scalar gamma_b_per_us) {
  using std::abs;
  using std::exp;
  if (!(beta > Scalar(0))) throw ValidationError("g2_auto_model: beta must be > 0");
  if (gamma_b_per_us < Scalar(0)) throw ValidationError("g2_auto_model: gamma_b must be >= 0");
  return Scalar(1) + exp(-gamma_b_per_us * abs(tau_us)) / beta;
}

/// Single-exponential antibunching recovery 1 - exp(-|tau| / tau_rec).
template <typename Scalar>
Scalar antibunching_recovery(Scalar tau_us, Scalar tau_rec_us) {
  using std::abs;
  using std::exp;
  return Scalar(1) - exp(-abs(tau_us) / tau_rec_us);
}

/// X / X+ cross-correlation: a blinking dip (1 - exp(-gamma_b |tau|)) times an
/// antibunching factor whose recovery time depends on the sign of tau
/// (X+ branch for tau > 0, X branch for tau < 0, mean of both at tau = 0).
template <typename Scalar>
Scalar g2_cross_model(Scalar tau_us, Scalar gamma_b_per_us, Scalar tau_rec_x_us,
                      Scalar tau_rec_xp_us) {
  using std::abs;
  using std::exp;
  if (!(gamma_b_per_us > Scalar(0)) || !(tau_rec_x_us > Scalar(0)) ||
      !(tau_rec_xp_us > Scalar(0))) {
    throw ValidationError("g2_cross_model: all parameters must be > 0");
  }
  const Scalar blink = Scalar(1) - exp(-gamma_b_per_us * abs(tau_us));
  Scalar anti;
  if (tau_us > Scalar(0)) {
    anti = antibunching_recovery(tau_us, tau_rec_xp_us);
  } else if (tau_us < Scalar(0)) {
    anti = antibunching_recovery(tau_us, tau_rec_x_us);
  } else {
    anti = Scalar(0.5) * (antibunching_recovery(tau_us, tau_rec_xp_us) +
                          antibunching_recovery(tau_us, tau_rec_x_us));
  }
  return blink * anti;
}

struct CaptureRates {
  double gamma_gc_per_us = 0.0;
  double gamma_cg_per_us = 0.0;
};

/// Splits (beta, gamma_b) into charging and neutralization rates such that
/// gamma_gc + gamma_cg = gamma_b and gamma_cg / gamma_gc = beta.
CaptureRates decompose_rates(double beta, double gamma_b_per_us);

/// Effective gate power after saturation: P * P_sat / (P + P_sat).
double effective_gate_power(const GateLaserConfig& gate);

/// Adds saturating-linear gate contributions to the switching rates.
RateSet apply_gate(const RateSet& base, const GateLaserConfig& gate);

}  // namespace qdb

#endif  // QDBLINK_DYNAMICS_HPP
