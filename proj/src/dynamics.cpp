#include "qdblink/dynamics.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace qdb {
namespace {

void require_rate(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ValidationError(std::string("rates.") + name + " must be a finite value >= 0");
  }
}

void require_probability(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ValidationError(std::string("rates.") + name + " must lie in [0, 1]");
  }
}

}  // namespace

void validate(const RateSet& r) {
  require_probability(r.p_xx, "p_xx");
  require_probability(r.p_c, "p_c");
  require_rate(r.gamma_xx_per_ns, "gamma_xx_per_ns");
  require_rate(r.gamma_x_per_ns, "gamma_x_per_ns");
  require_rate(r.gamma_c_per_ns, "gamma_c_per_ns");
  require_rate(r.gamma_gc_per_us, "gamma_gc_per_us");
  require_rate(r.gamma_cg_per_us, "gamma_cg_per_us");
  require_rate(r.gamma_e_d_per_us, "gamma_e_d_per_us");
  require_rate(r.gamma_h_d_per_us, "gamma_h_d_per_us");
}

std::vector<std::string> rate_warnings(const RateSet& r) {
  std::vector<std::string> out;
  // 1/ns -> 1/us
  const double slowest_radiative =
      1e3 * std::min({r.gamma_xx_per_ns, r.gamma_x_per_ns, r.gamma_c_per_ns});
  const double fastest_switch = std::max(r.effective_gc_per_us(), r.effective_cg_per_us());
  if (fastest_switch > 0.0 && slowest_radiative < kMinRateSeparation * fastest_switch) {
    std::ostringstream msg;
    msg << "radiative rates exceed switching rates only by a factor "
        << slowest_radiative / fastest_switch << " (< " << kMinRateSeparation
        << "); cascades may be interrupted by charge switches";
    out.push_back(msg.str());
  }
  return out;
}

void validate(const GateLaserConfig& gate) {
  if (!(gate.power_nw >= 0.0)) throw ValidationError("gate.power_nw must be >= 0");
  if (!(gate.sat_power_nw > 0.0)) throw ValidationError("gate.sat_power_nw must be > 0");
}

SteadyState steady_state(const RateSet& rates, double rep_rate_hz, double detector_eff) {
  validate(rates);
  if (!(rep_rate_hz > 0.0)) throw ValidationError("steady_state: rep_rate must be > 0");
  if (!(detector_eff >= 0.0 && detector_eff <= 1.0)) {
    throw ValidationError("steady_state: detector efficiency must lie in [0, 1]");
  }
  const double gc = rates.effective_gc_per_us();
  const double cg = rates.effective_cg_per_us();
  if (gc + cg <= 0.0) {
    throw ValidationError(
        "steady_state: gamma_gc and gamma_cg are both zero, occupation is undefined");
  }

  SteadyState s;
  s.gamma_b_per_us = gc + cg;
  s.p_neutral = cg / s.gamma_b_per_us;
  s.p_charged = gc / s.gamma_b_per_us;
  s.beta = gc > 0.0 ? cg / gc : std::numeric_limits<double>::infinity();
  s.n_h_st = s.p_charged;
  s.rate_x = rep_rate_hz * rates.p_xx * s.p_neutral * detector_eff;
  s.rate_xx = s.rate_x;
  s.rate_xplus = rep_rate_hz * rates.p_c * s.p_charged * detector_eff;
  const double total = s.rate_x + s.rate_xplus;
  if (total > 0.0) {
    s.r_x = s.rate_x / total;
    s.r_xplus = 1.0 - s.r_x;
  }
  s.eta_ex = rates.p_xx * s.p_neutral;
  return s;
}

double beta_from_eta_ex(double p_xx, double eta_ex) {
  if (!(p_xx > 0.0) || !(eta_ex > 0.0) || !(eta_ex < p_xx)) {
    throw ValidationError("beta_from_eta_ex: requires 0 < eta_ex < p_xx");
  }
  const double neutral = eta_ex / p_xx;
  return neutral / (1.0 - neutral);
}

CaptureRates decompose_rates(double beta, double gamma_b_per_us) {
  if (!(beta > 0.0) || !(gamma_b_per_us > 0.0)) {
    throw ValidationError("decompose_rates: beta and gamma_b must be > 0");
  }
  CaptureRates out;
  out.gamma_gc_per_us = gamma_b_per_us / (1.0 + beta);
  // Complement keeps gamma_gc + gamma_cg == gamma_b in floating point.
  out.gamma_cg_per_us = gamma_b_per_us - out.gamma_gc_per_us;
  return out;
}

double effective_gate_power(const GateLaserConfig& gate) {
  validate(gate);
  if (gate.power_nw == 0.0) return 0.0;
  return gate.power_nw * gate.sat_power_nw / (gate.power_nw + gate.sat_power_nw);
}

RateSet apply_gate(const RateSet& base, const GateLaserConfig& gate) {
  const double p_eff = effective_gate_power(gate);
  RateSet out = base;
  if (p_eff == 0.0) return out;
  out.gamma_gc_per_us = base.gamma_gc_per_us + gate.map_gc_per_nw_us * p_eff;
  out.gamma_cg_per_us = base.gamma_cg_per_us + gate.map_cg_per_nw_us * p_eff;
  if (out.gamma_gc_per_us < 0.0 || out.gamma_cg_per_us < 0.0) {
    throw ValidationError("apply_gate: gate coefficients drive a switching rate below zero");
  }
  return out;
}

}  // namespace qdb
