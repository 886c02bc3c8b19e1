// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qdblink/blink_fit.hpp"
#include "qdblink/correlation.hpp"
#include "qdblink/dynamics.hpp"
#include "qdblink/photon_sim.hpp"
#include "qdblink/pipeline.hpp"
#include "qdblink/tomography.hpp"

namespace {

using namespace qdb;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RateSet oracle_rates() {
  RateSet r;
  r.gamma_gc_per_us = 0.5;
  r.gamma_cg_per_us = 1.0;
  r.p_xx = 0.8;
  return r;
}

AnalysisOptions analysis(double p_xx) {
  AnalysisOptions o;
  o.fit.p_xx = p_xx;
  return o;
}

// Shared by criteria 1, 4 and 6: 10 s oracle run with the default detector.
struct Oracle {
  TimeTagStream stream;
  PulsedAnalysis auto_fit;
  double seconds = 0.0;
};

const Oracle& oracle() {
  static const Oracle o = [] {
    Oracle out;
    const auto t0 = Clock::now();
    out.stream = simulate_stream(oracle_rates(), PulseTrain{}, DetectorModel{}, 10.0, 2024);
    out.auto_fit = analyze_auto(out.stream, Channel::kX, analysis(0.8));
    out.seconds = seconds_since(t0);
    return out;
  }();
  return o;
}

Outcome blinking_fit_recovery() {
  const auto& o = oracle();
  const auto& f = o.auto_fit.fit;
  const double db = std::abs(f.beta - 2.0), dg = std::abs(f.gamma_b - 1.5);
  const bool ok = db <= 0.05 * 2.0 && dg <= 0.05 * 1.5 && db <= 3.0 * f.beta_err &&
                  dg <= 3.0 * f.gamma_b_err && o.seconds < 120.0;
  return {ok, fmt("beta %.4f +/- %.4f (%.1f sigma), gamma_b %.4f +/- %.4f /us (%.1f sigma), "
                  "%zu tags, %.1f s",
                  f.beta, f.beta_err, db / f.beta_err, f.gamma_b, f.gamma_b_err,
                  dg / f.gamma_b_err, o.stream.size(), o.seconds)};
}

Outcome bunching_amplitude_identity() {
  DetectorModel det;
  det.efficiency = {0.05, 0.05, 0.05, 0.0};
  const double grid[] = {0.2, 0.5, 1.0, 2.0};
  double worst = 0.0;
  std::string where;
  std::uint64_t seed = 100;
  for (double gc : grid) {
    for (double cg : grid) {
      RateSet r = oracle_rates();
      r.gamma_gc_per_us = gc;
      r.gamma_cg_per_us = cg;
      const auto s = simulate_stream(r, PulseTrain{}, det, 1.0, seed++);
      const auto fit = analyze_auto(s, Channel::kX, analysis(0.8)).fit;
      const double truth = 1.0 + gc / cg;
      const double rel = std::abs(fit.g2_at_zero() - truth) / truth;
      if (rel >= worst) {
        worst = rel;
        where = fmt("gc %.1f cg %.1f: %.4f vs %.4f", gc, cg, fit.g2_at_zero(), truth);
      }
    }
  }
  return {worst < 0.05, fmt("worst relative deviation %.2f%% (%s)", 100.0 * worst, where.c_str())};
}

Outcome antibunching_purity() {
  DetectorModel det;
  det.dark_rate_cps = 0.0;
  const auto s = simulate_stream(oracle_rates(), PulseTrain{}, det, 2.0, 7);
  const auto P = s.rep_period_ps();
  const auto hist = correlate(s, Channel::kX, Channel::kX, 20'000'000, P);
  const auto binned = pulse_bin(hist, P, false, 10.0);
  double central = 0.0, side = 0.0;
  int n_side = 0;
  for (const auto& p : binned.peaks) {
    if (p.pulse_index == 0) {
      central = p.raw;
    } else {
      side += p.raw;
      ++n_side;
    }
  }
  const double ratio = central / (side / n_side);
  return {ratio < 0.05, fmt("central %.0f vs side-peak mean %.1f, ratio %.4f", central,
                            side / n_side, ratio)};
}

Outcome flat_long_delay() {
  const auto& o = oracle();
  const double gamma = o.auto_fit.fit.gamma_b;
  const auto P = o.stream.rep_period_ps();
  const auto hist = log_correlate(o.stream, Channel::kX, Channel::kX, P, 1'000'000'000, 8, P);
  const auto g2 = hist.normalized();
  const double from_ps = 5.0 / gamma * 1e6;
  double worst = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist.bin_edges_ps[i] < from_ps) continue;
    worst = std::max(worst, std::abs(g2[i] - 1.0));
    ++n;
  }
  return {n > 0 && worst <= 0.02 && hist.bin_edges_ps.back() >= 0.99e9,
          fmt("%d log bins from %.2f us to %.3f ms, max |g2 - 1| = %.4f", n, from_ps * 1e-6,
              hist.bin_edges_ps.back() * 1e-9, worst)};
}

std::vector<std::uint64_t> trace_counts(const TimeTagStream& s, double bin_ms) {
  std::vector<std::uint64_t> out;
  for (const auto& b : simulate_intensity_trace(s, bin_ms)) out.push_back(b.counts);
  return out;
}

Outcome gaussian_trace() {
  DetectorModel det;
  det.efficiency = {0.0156, 0.0156, 0.0156, 0.0};
  RateSet steady = oracle_rates();
  steady.gamma_gc_per_us = 0.0;
  const auto s = simulate_stream(steady, PulseTrain{}, det, 3.0, 31);
  bool ok = true;
  std::string detail;
  for (double bin_ms : {0.3, 3.0, 30.0}) {
    const auto check = gaussian_trace_check(trace_counts(s, bin_ms));
    ok = ok && !check.bimodal && check.chi2_per_dof < 2.0;
    detail += fmt("%.1f ms chi2/dof %.2f%s; ", bin_ms, check.chi2_per_dof,
                  check.bimodal ? " bimodal" : "");
  }
  RateSet slow = oracle_rates();
  slow.gamma_gc_per_us = slow.gamma_cg_per_us = 1e-4;  // 5 ms mean dwell
  const auto t = simulate_stream(slow, PulseTrain{}, det, 1.0, 32);
  const auto check = gaussian_trace_check(trace_counts(t, 0.3));
  ok = ok && check.bimodal;
  detail += fmt("telegraph 0.3 ms %s (chi2/dof %.1f vs %.2f)",
                check.bimodal ? "bimodal" : "not flagged", check.chi2_per_dof,
                check.two_gaussian_chi2_per_dof);
  return {ok, detail};
}

Outcome cross_auto_consistency() {
  const auto& o = oracle();
  const auto& a = o.auto_fit.fit;
  AnalysisOptions opts = analysis(0.8);
  opts.gamma_b_hint = a.gamma_b;
  const auto c = analyze_cross(o.stream, Channel::kX, Channel::kXPlus, opts).fit;
  const double joint = std::hypot(a.gamma_b_err, c.gamma_b_err);
  const double d = std::abs(a.gamma_b - c.gamma_b);
  return {d < 2.0 * joint, fmt("auto %.4f +/- %.4f, cross %.4f +/- %.4f /us, %.2f joint sigma",
                               a.gamma_b, a.gamma_b_err, c.gamma_b, c.gamma_b_err, d / joint)};
}

Outcome eta_anchors() {
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 70;
  for (double eta : {0.2557, 0.4953}) {
    const double beta = beta_from_eta_ex(1.0, eta);
    const auto split = decompose_rates(beta, 1.5);
    RateSet r = oracle_rates();
    r.p_xx = 1.0;
    r.gamma_gc_per_us = split.gamma_gc_per_us;
    r.gamma_cg_per_us = split.gamma_cg_per_us;
    const auto s = simulate_stream(r, PulseTrain{}, DetectorModel{}, 10.0, seed++);
    const auto fit = analyze_auto(s, Channel::kX, analysis(1.0)).fit;
    ok = ok && std::abs(fit.eta_ex - eta) <= 0.01;
    detail += fmt("target %.2f%% -> %.2f%% +/- %.2f%%; ", 100 * eta, 100 * fit.eta_ex,
                  100 * fit.eta_ex_err);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome saturation_fit() {
  // Gate neutralization offset by an equal charging decrease keeps gamma_b
  // fixed, so the X intensity tracks p_neutral = 1 + m P_eff / gamma_cg.
  const double p_sat = 200.0, m = 0.3 / p_sat;
  RateSet base = oracle_rates();
  GateLaserConfig gate;
  gate.sat_power_nw = p_sat;
  gate.map_cg_per_nw_us = m;
  gate.map_gc_per_nw_us = -m;
  DetectorModel det;
  det.efficiency = {0.05, 0.05, 0.05, 0.0};
  const double duration = 1.0;

  auto x_counts = [&](const RateSet& r, std::uint64_t seed) {
    const auto s = simulate_stream(r, PulseTrain{}, det, duration, seed);
    return static_cast<double>(s.counts_per_channel()[0]);
  };
  std::uint64_t seed = 800;
  const double n_tp = x_counts(base, seed++);
  std::vector<SaturationPoint> points;
  for (double power : {0.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0}) {
    gate.power_nw = power;
    RateSet mix = apply_gate(base, gate);
    RateSet gate_only = mix;
    gate_only.p_xx = 0.0;  // gate laser alone: no cascade, dark counts only
    const double n_mix = x_counts(mix, seed++);
    const double n_gate = x_counts(gate_only, seed++);
    const double value = normalized_intensity(n_mix, n_gate, n_tp);
    const double sigma = value * std::sqrt(1.0 / n_mix + 1.0 / n_tp);
    points.push_back({power, value, sigma});
  }
  const auto fit = fit_saturation(points);
  const bool ok = fit.identifiable && std::abs(fit.p_sat - p_sat) <= 0.1 * p_sat &&
                  std::abs(fit.saturated_level() - 1.3) <= 0.03;
  return {ok, fmt("p_sat %.1f +/- %.1f nW, saturated level %.4f (offset %.4f + plateau %.4f)",
                  fit.p_sat, fit.p_sat_err, fit.saturated_level(), fit.offset, fit.plateau)};
}

Outcome tomography_round_trip() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 900;
  for (double p : {0.25, 0.55, 0.9}) {
    const auto records = simulate_polarized_pairs(werner_state(p), full_settings(), 10'000, seed++);
    const auto mle = mle_reconstruct(records);
    ResampleOptions ro;
    ro.n_resamples = 200;
    ro.seed = seed++;
    const auto errors = resample_errors(records, ro);
    const double f = fidelity(mle.rho);
    const double truth = (3.0 * p + 1.0) / 4.0;
    const bool monotone =
        std::is_sorted(mle.likelihood_trace.begin(), mle.likelihood_trace.end());
    ok = ok && std::abs(f - truth) <= 0.02 && check_physical(mle.rho).is_physical() && monotone;
    detail += fmt("p %.2f: F %.4f +/- %.4f vs %.4f%s; ", p, f, errors.fidelity_sigma, truth,
                  monotone ? "" : " (likelihood not monotone)");
  }
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 60.0;
  detail += fmt("%.1f s with 200 resamples each", elapsed);
  return {ok, detail};
}

// All-pairs reference histogram, independent of the sliding-window sweep.
std::vector<std::uint64_t> all_pairs(const std::vector<std::int64_t>& a,
                                     const std::vector<std::int64_t>& b, std::int64_t tau_max,
                                     std::int64_t w, bool autocorrelation) {
  const std::int64_t K = tau_max / w;
  std::vector<std::uint64_t> h(static_cast<std::size_t>(2 * K + 1), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (autocorrelation && i == j) continue;
      const std::int64_t d = b[j] - a[i];
      const std::int64_t ad = d < 0 ? -d : d;
      if (2 * ad >= (2 * K + 1) * w) continue;
      const std::int64_t k = (2 * ad + w) / (2 * w);
      ++h[static_cast<std::size_t>(K + (d < 0 ? -k : k))];
    }
  }
  return h;
}

Outcome brute_force_equivalence() {
  std::mt19937_64 rng(1010);
  int matched = 0;
  for (int c = 0; c < 50; ++c) {
    const bool autocorr = c % 3 == 0;
    const auto na = std::uniform_int_distribution<std::size_t>(1, 5000)(rng);
    const auto nb = autocorr ? na : std::uniform_int_distribution<std::size_t>(1, 5000)(rng);
    // Narrow spans force repeated timestamps and delays on bin boundaries.
    const std::int64_t span = std::uniform_int_distribution<std::int64_t>(1000, 50'000'000)(rng);
    const std::int64_t w = std::uniform_int_distribution<std::int64_t>(1, 20'000)(rng);
    const std::int64_t tau_max = w * std::uniform_int_distribution<std::int64_t>(0, 60)(rng) +
                                 std::uniform_int_distribution<std::int64_t>(0, w - 1)(rng);
    std::uniform_int_distribution<std::int64_t> t(0, span);
    std::vector<std::int64_t> a(na), b(nb);
    for (auto& x : a) x = t(rng);
    std::sort(a.begin(), a.end());
    if (autocorr) {
      b = a;
    } else {
      for (auto& x : b) x = t(rng);
      std::sort(b.begin(), b.end());
    }
    CorrelateOptions opts;
    opts.autocorrelation = autocorr;
    opts.threads = 1 + static_cast<unsigned>(c % 3);
    const auto hist = correlate(a, b, tau_max, w, opts);
    if (hist.counts == all_pairs(a, b, tau_max, w, autocorr)) ++matched;
  }
  return {matched == 50, fmt("%d / 50 randomized cases identical to the all-pairs count", matched)};
}

Outcome performance() {
  // Uniform pulsed arrivals at ~1 MHz detected rate on an 80 MHz grid.
  const std::int64_t P = 12'500;
  const std::size_t n = 10'000'000;
  std::mt19937_64 rng(1111);
  std::geometric_distribution<std::int64_t> gap(1.0 / 80.0);
  std::normal_distribution<double> jitter(0.0, 50.0);
  std::vector<std::int64_t> tags(n);
  std::int64_t pulse = 0;
  for (auto& t : tags) {
    pulse += 1 + gap(rng);
    t = pulse * P + std::llround(jitter(rng));
  }
  std::sort(tags.begin(), tags.end());
  const auto t0 = Clock::now();
  CorrelateOptions opts;
  opts.autocorrelation = true;
  const auto hist = correlate(tags, tags, 10'000'000, P, opts);
  const double elapsed = seconds_since(t0);
  return {elapsed < 10.0, fmt("%zu tags, +/-10 us window, %llu coincidences in %.2f s", n,
                              static_cast<unsigned long long>(hist.total()), elapsed)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"blinking fit recovery", blinking_fit_recovery},
      {"bunching amplitude identity", bunching_amplitude_identity},
      {"antibunching purity", antibunching_purity},
      {"flat long-delay correlation", flat_long_delay},
      {"Gaussian trace check", gaussian_trace},
      {"cross/auto consistency", cross_auto_consistency},
      {"excitation-efficiency anchors", eta_anchors},
      {"saturation fit", saturation_fit},
      {"tomography round-trip", tomography_round_trip},
      {"brute-force correlation equivalence", brute_force_equivalence},
      {"performance", performance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, out.pass ? "PASS" : "FAIL",
                criteria[i].first, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
