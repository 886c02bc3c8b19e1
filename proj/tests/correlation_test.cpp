#include "qdblink/correlation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qdblink/error.hpp"

namespace qdb {
namespace {

std::vector<std::int64_t> uniform_tags(std::size_t n, std::int64_t duration, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> when(0, duration - 1);
  std::vector<std::int64_t> out(n);
  for (auto& t : out) t = when(rng);
  std::sort(out.begin(), out.end());
  return out;
}

// All-pairs reference. Bin k >= 0 holds [(k - 1/2) w, (k + 1/2) w) for d >= 0,
// and negative delays mirror it.
std::vector<std::uint64_t> brute_force(const std::vector<std::int64_t>& a,
                                       const std::vector<std::int64_t>& b, std::int64_t tau_max,
                                       std::int64_t w, bool autocorrelation) {
  const std::int64_t k_max = tau_max / w;
  std::vector<std::uint64_t> out(static_cast<std::size_t>(2 * k_max + 1), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (autocorrelation && i == j) continue;
      const std::int64_t d = b[j] - a[i];
      const double x = std::abs(static_cast<double>(d)) / static_cast<double>(w);
      for (std::int64_t k = 0; k <= k_max; ++k) {
        if (x >= k - 0.5 && x < k + 0.5) {
          ++out[static_cast<std::size_t>(k_max + (d < 0 ? -k : k))];
          break;
        }
      }
    }
  }
  return out;
}

TEST(Correlate, TwoTagsAtPlusMinus100ns) {
  const std::vector<std::int64_t> a = {1'000'000};
  const std::vector<std::int64_t> b = {1'100'000};
  const auto forward = correlate(a, b, 200'000, 1000);
  const auto backward = correlate(b, a, 200'000, 1000);
  ASSERT_EQ(forward.total(), 1u);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    if (forward.counts[i] == 1) EXPECT_DOUBLE_EQ(forward.center(i), 100'000.0);
    if (backward.counts[i] == 1) EXPECT_DOUBLE_EQ(backward.center(i), -100'000.0);
  }
}

TEST(Correlate, MatchesAllPairsReference) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t duration = std::uniform_int_distribution<std::int64_t>(500, 20'000)(rng);
    const auto na = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
    const auto nb = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
    const std::int64_t w = std::uniform_int_distribution<std::int64_t>(1, 40)(rng);
    const std::int64_t tau_max = w * std::uniform_int_distribution<std::int64_t>(1, 60)(rng) +
                                 std::uniform_int_distribution<std::int64_t>(0, w - 1)(rng);
    const auto a = uniform_tags(na, duration, rng());
    const auto b = uniform_tags(nb, duration, rng());
    CorrelateOptions options;
    options.threads = 1 + trial % 3;
    const auto hist = correlate(a, b, tau_max, w, options);
    EXPECT_EQ(hist.counts, brute_force(a, b, tau_max, w, false)) << "trial " << trial;

    options.autocorrelation = true;
    const auto self = correlate(a, a, tau_max, w, options);
    EXPECT_EQ(self.counts, brute_force(a, a, tau_max, w, true)) << "trial " << trial;
  }
}

TEST(Correlate, SwappingInputsMirrorsHistogram) {
  const auto a = uniform_tags(3000, 10'000'000, 1);
  const auto b = uniform_tags(3000, 10'000'000, 2);
  const auto ab = correlate(a, b, 100'000, 250);
  const auto ba = correlate(b, a, 100'000, 250);
  std::vector<std::uint64_t> reversed(ba.counts.rbegin(), ba.counts.rend());
  EXPECT_EQ(ab.counts, reversed);
}

TEST(Correlate, UncorrelatedStreamsAreFlat) {
  const std::int64_t duration = 1'000'000'000;
  const auto a = uniform_tags(100'000, duration, 3);
  const auto b = uniform_tags(100'000, duration, 4);
  CorrelateOptions options;
  options.duration_ps = duration;
  const auto hist = correlate(a, b, 2'000'000, 20'000, options);
  const auto g2 = hist.normalized();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double sigma = 1.0 / std::sqrt(hist.uncorrelated[i]);
    EXPECT_NEAR(g2[i], 1.0, 4.0 * sigma) << "bin " << hist.center(i);
  }
}

TEST(Correlate, RejectsUnsortedInput) {
  const std::vector<std::int64_t> a = {5, 3, 9};
  const std::vector<std::int64_t> b = {1, 2, 3};
  EXPECT_THROW(correlate(a, b, 10, 1), ValidationError);
  EXPECT_THROW(correlate(b, a, 10, 1), ValidationError);
  EXPECT_THROW(correlate(b, b, 10, 0), ValidationError);
}

TEST(Correlate, NormWindowBeyondSpanThrows) {
  const auto a = uniform_tags(100, 1'000'000, 5);
  auto hist = correlate(a, a, 10'000, 100);
  EXPECT_THROW(apply_norm_window(hist, 20'000), ValidationError);
  apply_norm_window(hist, 5'000);
  EXPECT_GT(hist.normalization, 0.0);
}

CorrelationHistogram hand_histogram(std::int64_t w, std::vector<std::uint64_t> counts,
                                    std::int64_t duration) {
  CorrelationHistogram hist;
  const auto k_max = static_cast<std::int64_t>(counts.size() / 2);
  for (std::size_t i = 0; i <= counts.size(); ++i) {
    hist.bin_edges_ps.push_back((static_cast<double>(i) - k_max - 0.5) * w);
  }
  hist.counts = std::move(counts);
  hist.uncorrelated.assign(hist.counts.size(), 1.0);
  hist.duration_ps = duration;
  return hist;
}

TEST(PulseBin, BoundaryBinsAreSplitEvenly) {
  // w = P / 2: bins at odd multiples of w sit on window boundaries.
  const std::int64_t P = 1000;
  const auto hist = hand_histogram(500, {4, 4, 4, 4, 4, 4, 4, 4, 4}, 1'000'000'000'000);
  const auto binned = pulse_bin(hist, P, false, 0.0);
  ASSERT_EQ(binned.peaks.size(), 3u);  // the +-2 windows are cut off by the span
  for (const auto& p : binned.peaks) EXPECT_DOUBLE_EQ(p.raw, 8.0);
  for (const auto& p : binned.peaks) EXPECT_NEAR(p.g2, 1.0, 1e-6);
}

TEST(PulseBin, ExcludesCentralPeakAndNormalizes) {
  const std::int64_t P = 1000;
  std::vector<std::uint64_t> counts(41, 10);
  counts[20] = 0;
  const auto hist = hand_histogram(100, counts, 1'000'000'000'000);
  const auto with_centre = pulse_bin(hist, P, false, 0.001);
  const auto without = pulse_bin(hist, P, true, 0.001);
  EXPECT_EQ(with_centre.peaks.size(), without.peaks.size() + 1);
  for (const auto& p : without.peaks) {
    EXPECT_NE(p.pulse_index, 0);
    EXPECT_NEAR(p.g2, 1.0, 1e-6);
    EXPECT_NEAR(p.sigma, std::sqrt(100.0) / 100.0, 1e-6);
  }
  EXPECT_THROW(pulse_bin(hist, P, true, 0.01), ValidationError);
  EXPECT_THROW(pulse_bin(hist, 1050, true, 0.0), ValidationError);
}

TEST(PulseBin, PulsedUncorrelatedStreamsAreFlat) {
  const std::int64_t P = 12'500;
  const std::int64_t n_pulses = 8'000'000;
  std::mt19937_64 rng(8);
  std::bernoulli_distribution hit(0.01);
  std::normal_distribution<double> jitter(0.0, 100.0);
  std::vector<std::int64_t> a, b;
  for (std::int64_t k = 1; k < n_pulses; ++k) {
    if (hit(rng)) a.push_back(k * P + std::llround(jitter(rng)));
    if (hit(rng)) b.push_back(k * P + std::llround(jitter(rng)));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CorrelateOptions options;
  options.duration_ps = n_pulses * P;
  const auto hist = correlate(a, b, 50 * P, P / 5, options);
  const auto binned = pulse_bin(hist, P, false, 0.1);
  for (const auto& p : binned.peaks) EXPECT_NEAR(p.g2, 1.0, 4.0 * p.sigma) << p.pulse_index;
}

TEST(LogCorrelate, MatchesAllPairsCountsPerBin) {
  const auto a = uniform_tags(400, 2'000'000, 10);
  const auto b = uniform_tags(400, 2'000'000, 11);
  const auto hist = log_correlate(a, b, 100, 1'000'000, 6, 50);
  ASSERT_TRUE(hist.log_spaced);
  std::vector<std::uint64_t> expected(hist.size(), 0);
  for (auto ta : a) {
    for (auto tb : b) {
      const double d = static_cast<double>(tb - ta);
      for (std::size_t k = 0; k < hist.size(); ++k) {
        if (d >= hist.bin_edges_ps[k] && d < hist.bin_edges_ps[k + 1]) ++expected[k];
      }
    }
  }
  EXPECT_EQ(hist.counts, expected);
  for (std::size_t k = 0; k + 1 < hist.bin_edges_ps.size(); ++k) {
    EXPECT_GT(hist.bin_edges_ps[k + 1], hist.bin_edges_ps[k]);
    EXPECT_DOUBLE_EQ(std::fmod(hist.bin_edges_ps[k] + 25.0, 50.0), 0.0);
  }
}

TEST(LogCorrelate, UncorrelatedStreamsAreFlat) {
  const std::int64_t duration = 10'000'000'000;
  const auto a = uniform_tags(200'000, duration, 12);
  const auto b = uniform_tags(200'000, duration, 13);
  const auto hist = log_correlate(a, b, 1000, duration / 1000, 8, 1000, duration);
  const auto g2 = hist.normalized();
  for (std::size_t k = 0; k < hist.size(); ++k) {
    const double sigma = 1.0 / std::sqrt(hist.uncorrelated[k]);
    EXPECT_NEAR(g2[k], 1.0, 4.0 * sigma) << "bin " << hist.center(k);
  }
}

TEST(LogCorrelate, RejectsBadRanges) {
  const auto a = uniform_tags(10, 100'000, 14);
  EXPECT_THROW(log_correlate(a, a, 10, 10'000, 8, 100), ValidationError);
  EXPECT_THROW(log_correlate(a, a, 1000, 500, 8, 100), ValidationError);
  EXPECT_THROW(log_correlate(a, a, 1000, 10'000, 3, 100), ValidationError);
}

std::vector<std::uint64_t> poisson_trace(std::size_t n, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<std::uint64_t> draw(mean);
  std::vector<std::uint64_t> out(n);
  for (auto& c : out) c = draw(rng);
  return out;
}

TEST(TraceCheck, PoissonTraceIsSingleGaussian) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto trace = poisson_trace(1000, 5000.0, seed);
    const auto check = gaussian_trace_check(trace);
    EXPECT_NEAR(check.mean, 5000.0, 10.0);
    EXPECT_NEAR(check.sigma, std::sqrt(5000.0), 7.0);
    EXPECT_LT(check.chi2_per_dof, 2.0);
    EXPECT_FALSE(check.bimodal) << "seed " << seed;
  }
}

TEST(TraceCheck, TwoLevelTraceIsBimodal) {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution on(0.6);
  std::poisson_distribution<std::uint64_t> high(3000.0), low(1500.0);
  std::vector<std::uint64_t> trace(1000);
  for (auto& c : trace) c = on(rng) ? high(rng) : low(rng);
  const auto check = gaussian_trace_check(trace);
  EXPECT_TRUE(check.bimodal);
  EXPECT_GT(check.chi2_per_dof, 2.0);
  EXPECT_LT(check.two_gaussian_chi2_per_dof, 2.0);
}

TEST(TraceCheck, RejectsDegenerateTraces) {
  EXPECT_THROW(gaussian_trace_check(std::vector<std::uint64_t>(50, 3)), ValidationError);
  EXPECT_THROW(gaussian_trace_check(std::vector<std::uint64_t>(500, 0)), NumericalError);
  EXPECT_THROW(gaussian_trace_check(std::vector<std::uint64_t>(500, 7)), NumericalError);
}

}  // namespace
}  // namespace qdb
