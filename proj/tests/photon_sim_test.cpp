#include "qdblink/photon_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "qdblink/correlation.hpp"

namespace qdb {
namespace {

DetectorModel ideal_detector(double efficiency) {
  DetectorModel det;
  det.efficiency = {efficiency, efficiency, efficiency, 0.0};
  det.dark_rate_cps = 0.0;
  det.jitter_sigma_ps = 0.0;
  return det;
}

RateSet with_switching(double gc, double cg) {
  RateSet r;
  r.gamma_gc_per_us = gc;
  r.gamma_cg_per_us = cg;
  return r;
}

std::size_t count(const TimeTagStream& s, Channel c) {
  return s.counts_per_channel()[static_cast<std::size_t>(c)];
}

TEST(SimulateStream, NeverChargedEmitsNoXPlus) {
  const RateSet rates = with_switching(0.0, 1.0);
  const auto clean = simulate_stream(rates, PulseTrain{}, ideal_detector(0.05), 0.01, 1);
  EXPECT_EQ(count(clean, Channel::kXPlus), 0u);
  EXPECT_GT(count(clean, Channel::kX), 0u);

  DetectorModel noisy = ideal_detector(0.05);
  noisy.dark_rate_cps = 1e5;
  const auto dark = simulate_stream(rates, PulseTrain{}, noisy, 0.01, 1);
  // Only dark counts: Poisson with mean 1000.
  EXPECT_NEAR(static_cast<double>(count(dark, Channel::kXPlus)), 1000.0, 4.0 * std::sqrt(1000.0));
}

TEST(SimulateStream, DeterministicExcitationGivesOnePairPerNeutralPulse) {
  RateSet rates = with_switching(0.5, 1.0);
  rates.p_xx = 1.0;
  rates.p_c = 0.0;
  const PulseTrain pulses;
  const double duration_s = 4e5 * pulses.period_ps() * 1e-12;  // whole periods
  const auto result = simulate_stream_detailed(rates, pulses, ideal_detector(1.0), duration_s, 3);
  const auto& s = result.stream;
  EXPECT_EQ(count(s, Channel::kX), result.telegraph.pulses_neutral);
  EXPECT_EQ(count(s, Channel::kXX), result.telegraph.pulses_neutral);
  EXPECT_EQ(result.telegraph.pulses_neutral + result.telegraph.pulses_charged, 400'000u);

  // Each pulse window holds its XX photon followed by its X photon.
  const auto x = s.channel_times(Channel::kX);
  const auto xx = s.channel_times(Channel::kXX);
  ASSERT_EQ(x.size(), xx.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ASSERT_EQ(x[i] / pulses.period_ps(), xx[i] / pulses.period_ps());
    ASSERT_LE(xx[i], x[i]);
  }
}

TEST(SimulateStream, SeedReproducibility) {
  const RateSet rates;
  const DetectorModel det;
  const auto a = simulate_stream(rates, PulseTrain{}, det, 0.02, 42);
  const auto b = simulate_stream(rates, PulseTrain{}, det, 0.02, 42);
  const auto c = simulate_stream(rates, PulseTrain{}, det, 0.02, 43);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.records()[i].timestamp_ps, b.records()[i].timestamp_ps);
    ASSERT_EQ(a.records()[i].channel, b.records()[i].channel);
  }
  EXPECT_FALSE(a.size() == c.size() &&
               std::equal(a.records().begin(), a.records().end(), c.records().begin(),
                          [](const TimeTag& p, const TimeTag& q) {
                            return p.timestamp_ps == q.timestamp_ps && p.channel == q.channel;
                          }));
}

TEST(SimulateStream, SortedAndInsideDuration) {
  DetectorModel det;
  det.jitter_sigma_ps = 500.0;
  det.dark_rate_cps = 1e4;
  const auto s = simulate_stream(RateSet{}, PulseTrain{}, det, 0.01, 5);
  ASSERT_FALSE(s.empty());
  for (std::size_t i = 1; i < s.size(); ++i) {
    ASSERT_LE(s.records()[i - 1].timestamp_ps, s.records()[i].timestamp_ps);
  }
  EXPECT_GE(s.records().front().timestamp_ps, 0);
  EXPECT_LE(s.records().back().timestamp_ps, s.duration_ps());
  EXPECT_EQ(s.provenance().seed, 5u);
  EXPECT_EQ(s.provenance().rates, RateSet{});
}

TEST(SimulateStream, DeadTimeIsRespected) {
  DetectorModel det = ideal_detector(0.5);
  det.dead_time_ps = 40'000.0;  // longer than the 12.5 ns period
  det.dark_rate_cps = 1e5;
  const auto s = simulate_stream(RateSet{}, PulseTrain{}, det, 0.002, 6);
  for (Channel c : {Channel::kX, Channel::kXX, Channel::kXPlus}) {
    const auto t = s.channel_times(c);
    ASSERT_GT(t.size(), 100u);
    for (std::size_t i = 1; i < t.size(); ++i) ASSERT_GE(t[i] - t[i - 1], 40'000);
  }
}

TEST(SimulateStream, MeanRateMatchesSteadyState) {
  const RateSet rates;
  const PulseTrain pulses;
  const double duration_s = 1e8 / pulses.rep_rate_hz;  // 1e8 pulses
  const auto s = simulate_stream(rates, pulses, ideal_detector(0.01), duration_s, 7);
  const double expected = steady_state(rates, pulses.rep_rate_hz, 0.01).rate_x * duration_s;
  EXPECT_NEAR(static_cast<double>(count(s, Channel::kX)), expected, 3.0 * std::sqrt(expected));
}

TEST(SimulateStream, TelegraphOccupancy) {
  const RateSet rates = with_switching(0.5, 1.0);
  const auto result =
      simulate_stream_detailed(rates, PulseTrain{}, ideal_detector(0.001), 2.0, 8);
  const auto& t = result.telegraph;
  ASSERT_GE(t.switches, 1'000'000u);
  const auto s = steady_state(rates, 80e6, 0.001);
  EXPECT_NEAR(t.charged_pulse_fraction(), s.p_charged, 0.01 * s.p_charged);
  EXPECT_NEAR(t.neutral_time_fraction(), s.p_neutral, 0.01 * s.p_neutral);
}

TEST(SimulateStream, RejectsTooShortDuration) {
  EXPECT_THROW(simulate_stream(RateSet{}, PulseTrain{}, DetectorModel{}, 1e-9, 1), ValidationError);
  DetectorModel det;
  det.efficiency[0] = 1.5;
  EXPECT_THROW(simulate_stream(RateSet{}, PulseTrain{}, det, 1e-3, 1), ValidationError);
}

TEST(SimulateStream, RateSeparationWarningIsRecorded) {
  const RateSet slow_gap = with_switching(100.0, 100.0);
  const auto s = simulate_stream(slow_gap, PulseTrain{}, ideal_detector(0.01), 1e-4, 1);
  EXPECT_FALSE(s.provenance().warnings.empty());
}

// Pulse-binned autocorrelation of the simulated X channel against the closed form
// 1 + exp(-gamma_b |tau|) / beta at tau = 1 us (beta = 1, gamma_b = 1.5 / us).
TEST(SimulateStream, AutocorrelationMatchesBunchingModel) {
  const RateSet rates = with_switching(0.75, 0.75);
  const PulseTrain pulses;
  const auto s = simulate_stream(rates, pulses, ideal_detector(0.05), 2.0, 9);
  const std::int64_t P = pulses.period_ps();
  const auto hist = correlate(s, Channel::kX, Channel::kX, 1000 * P, P);
  const auto binned = pulse_bin(hist, P, true, 8.0);
  const PulsePeak* at_1us = nullptr;
  for (const auto& p : binned.peaks) {
    if (p.pulse_index == 80) at_1us = &p;
  }
  ASSERT_NE(at_1us, nullptr);
  EXPECT_NEAR(at_1us->tau_ps, 1e6, 1e-9);
  EXPECT_NEAR(at_1us->g2, 1.2231, 3.0 * at_1us->sigma);
}

// X / X+ cross-correlation at tau = +2 us against (1 - exp(-gamma_b tau)).
TEST(SimulateStream, CrossCorrelationMatchesBlinkingDip) {
  RateSet rates = with_switching(0.5, 0.5);
  rates.p_c = 0.8;
  const PulseTrain pulses;
  const auto s = simulate_stream(rates, pulses, ideal_detector(0.05), 2.0, 10);
  const std::int64_t P = pulses.period_ps();
  const auto hist = correlate(s, Channel::kX, Channel::kXPlus, 1200 * P, P);
  const auto binned = pulse_bin(hist, P, false, 12.0);
  for (const auto& p : binned.peaks) {
    if (p.pulse_index == 0) EXPECT_LT(p.g2, 0.01);
    if (p.pulse_index == 160) EXPECT_NEAR(p.g2, 0.8647, 3.0 * p.sigma);
  }
}

TEST(IntensityTrace, PoissonWithoutBlinking) {
  const RateSet never_charged = with_switching(0.0, 1.0);
  const auto s = simulate_stream(never_charged, PulseTrain{}, ideal_detector(0.01), 0.6, 11);
  const auto trace = simulate_intensity_trace(s, 3.0);
  ASSERT_EQ(trace.size(), 200u);
  const double expected = 80e6 * 0.8 * 0.01 * 3e-3;
  double mean = 0.0, var = 0.0;
  for (const auto& b : trace) mean += static_cast<double>(b.counts);
  mean /= trace.size();
  for (const auto& b : trace) var += std::pow(static_cast<double>(b.counts) - mean, 2);
  var /= trace.size() - 1;
  EXPECT_NEAR(mean, expected, 4.0 * std::sqrt(expected / trace.size()));
  // Sample variance of 200 Poisson bins lies within ~20% of the mean.
  EXPECT_NEAR(var / mean, 1.0, 0.3);
  EXPECT_EQ(trace[1].start_ps - trace[0].start_ps, 3'000'000'000);
}

TEST(IntensityTrace, NonBlinkingTracesAreSingleGaussian) {
  const RateSet never_charged = with_switching(0.0, 1.0);
  const auto s = simulate_stream(never_charged, PulseTrain{}, ideal_detector(0.0156), 3.0, 12);
  for (double bin_ms : {0.3, 3.0, 30.0}) {
    const auto trace = simulate_intensity_trace(s, bin_ms);
    std::vector<std::uint64_t> counts;
    for (const auto& b : trace) counts.push_back(b.counts);
    const auto check = gaussian_trace_check(counts);
    EXPECT_FALSE(check.bimodal) << bin_ms << " ms, chi2 " << check.chi2_per_dof;
    EXPECT_LT(check.chi2_per_dof, 3.0) << bin_ms << " ms";
  }
}

TEST(IntensityTrace, SlowTelegraphIsBimodal) {
  // gamma_b = 0.2 / ms.
  const RateSet slow = with_switching(1e-4, 1e-4);
  const auto s = simulate_stream(slow, PulseTrain{}, ideal_detector(0.0156), 1.0, 13);
  const auto trace = simulate_intensity_trace(s, 0.3);
  std::vector<std::uint64_t> counts;
  for (const auto& b : trace) counts.push_back(b.counts);
  const auto check = gaussian_trace_check(counts);
  EXPECT_TRUE(check.bimodal) << check.chi2_per_dof << " vs " << check.two_gaussian_chi2_per_dof;
}

TEST(IntensityTrace, EdgeCases) {
  const TimeTagStream empty({}, 1'000'000'000, 12'500);
  EXPECT_TRUE(simulate_intensity_trace(empty, 0.1).empty());
  const auto s = simulate_stream(RateSet{}, PulseTrain{}, DetectorModel{}, 0.01, 1);
  EXPECT_THROW(simulate_intensity_trace(s, 10.0), ValidationError);
  EXPECT_THROW(simulate_intensity_trace(s, 0.0), ValidationError);
  EXPECT_EQ(simulate_intensity_trace(s, 3.0).size(), 3u);  // partial bin dropped
}

TEST(PolarizedPairs, MeansFollowBornRule) {
  const std::int64_t pairs = 100'000'000;
  const auto hv = *ProjectorSetting::parse("HV");
  const auto hh = *ProjectorSetting::parse("HH");
  const std::vector<ProjectorSetting> settings = {hv, hh};

  const auto bell = simulate_polarized_pairs(pure_state(phi_plus()), settings, pairs, 1);
  EXPECT_EQ(bell[0].counts, 0);

  const auto mixed = simulate_polarized_pairs(maximally_mixed(), settings, pairs, 2);
  for (const auto& r : mixed) EXPECT_NEAR(double(r.counts), pairs / 4.0, 4.0 * std::sqrt(pairs / 4.0));

  const double p = 0.55;
  const double mean_hh = pairs * (p / 2 + (1 - p) / 4);
  const auto werner = simulate_polarized_pairs(werner_state(p), settings, pairs, 3);
  EXPECT_NEAR(double(werner[1].counts), mean_hh, 4.0 * std::sqrt(mean_hh));
}

TEST(PolarizedPairs, RejectsInvalidInput) {
  DensityMatrix4 bad = maximally_mixed();
  bad(0, 0) = -0.5;
  bad(1, 1) = 1.0;
  const auto settings = canonical_settings();
  EXPECT_THROW(simulate_polarized_pairs(bad, settings, 100, 1), ValidationError);
  EXPECT_THROW(simulate_polarized_pairs(maximally_mixed(), settings, 0, 1), ValidationError);
}

}  // namespace
}  // namespace qdb
