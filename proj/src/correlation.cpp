#include "qdblink/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "qdblink/error.hpp"

namespace qdb {
namespace {

void require_sorted(std::span<const std::int64_t> tags, const char* name) {
  if (!std::is_sorted(tags.begin(), tags.end())) {
    throw ValidationError(std::string("correlate: input ") + name + " is not sorted");
  }
}

std::int64_t default_duration(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  std::int64_t lo = std::min(a.front(), b.front());
  std::int64_t hi = std::max(a.back(), b.back());
  return hi - lo + 1;
}

// Linear-bin sweep of a[begin, end) against all of b.
void sweep_linear(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                  std::size_t begin, std::size_t end, std::int64_t w, std::int64_t k_max,
                  bool autocorrelation, std::vector<std::uint64_t>& counts) {
  // Delay d is kept when 2 |d| < (2K + 1) w.
  const std::int64_t reach2 = (2 * k_max + 1) * w;
  const std::int64_t two_w = 2 * w;
  const std::size_t nb = b.size();
  std::size_t lo = 0;
  if (begin < end) {
    // First b with 2 (a - b) < reach2, i.e. b > a - reach2 / 2.
    const std::int64_t ta = a[begin];
    lo = static_cast<std::size_t>(
        std::upper_bound(b.begin(), b.end(), ta - (reach2 + 1) / 2) - b.begin());
    while (lo < nb && 2 * (ta - b[lo]) >= reach2) ++lo;
    while (lo > 0 && 2 * (ta - b[lo - 1]) < reach2) --lo;
  }
  std::uint64_t* const out = counts.data() + k_max;
  for (std::size_t i = begin; i < end; ++i) {
    const std::int64_t ta = a[i];
    while (lo < nb && 2 * (ta - b[lo]) >= reach2) ++lo;
    for (std::size_t j = lo; j < nb; ++j) {
      const std::int64_t d = b[j] - ta;
      if (2 * d >= reach2) break;
      if (autocorrelation && j == i) continue;
      if (d >= 0) {
        ++out[(2 * d + w) / two_w];
      } else {
        ++out[-((-2 * d + w) / two_w)];
      }
    }
  }
}

}  // namespace

std::uint64_t CorrelationHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::vector<double> CorrelationHistogram::normalized() const {
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double ref = normalization > 0.0 ? normalization : uncorrelated[i];
    out[i] = ref > 0.0 ? static_cast<double>(counts[i]) / ref : 0.0;
  }
  return out;
}

CorrelationHistogram correlate(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                               std::int64_t tau_max_ps, std::int64_t bin_width_ps,
                               const CorrelateOptions& options) {
  if (a.empty() || b.empty()) throw ValidationError("correlate: both channels must be non-empty");
  if (bin_width_ps <= 0) throw ValidationError("correlate: bin_width must be > 0");
  if (tau_max_ps < bin_width_ps) throw ValidationError("correlate: tau_max must be >= bin_width");
  require_sorted(a, "a");
  require_sorted(b, "b");
  if (options.autocorrelation && a.size() != b.size()) {
    throw ValidationError("correlate: autocorrelation requires identical inputs");
  }

  const std::int64_t w = bin_width_ps;
  const std::int64_t k_max = tau_max_ps / w;
  const std::size_t n_bins = static_cast<std::size_t>(2 * k_max + 1);

  CorrelationHistogram hist;
  hist.tags_a = a.size();
  hist.tags_b = b.size();
  hist.duration_ps = options.duration_ps > 0 ? options.duration_ps : default_duration(a, b);
  hist.bin_edges_ps.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    hist.bin_edges_ps[i] = (static_cast<double>(static_cast<std::int64_t>(i) - k_max) - 0.5) * w;
  }

  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(a.size())));
  if (threads == 1) {
    hist.counts.assign(n_bins, 0);
    sweep_linear(a, b, 0, a.size(), w, k_max, options.autocorrelation, hist.counts);
  } else {
    std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(n_bins));
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          sweep_linear(a, b, a.size() * t / threads, a.size() * (t + 1) / threads, w, k_max,
                       options.autocorrelation, partial[t]);
        });
      }
    }
    hist.counts.assign(n_bins, 0);
    for (const auto& p : partial) {
      for (std::size_t i = 0; i < n_bins; ++i) hist.counts[i] += p[i];
    }
  }

  const double T = static_cast<double>(hist.duration_ps);
  const double pairs = options.autocorrelation
                           ? static_cast<double>(a.size()) * (static_cast<double>(a.size()) - 1)
                           : static_cast<double>(a.size()) * static_cast<double>(b.size());
  hist.uncorrelated.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double tau = std::abs(hist.center(i));
    hist.uncorrelated[i] = pairs * static_cast<double>(w) * std::max(0.0, T - tau) / (T * T);
  }
  return hist;
}

CorrelationHistogram correlate(const TimeTagStream& stream, Channel a, Channel b,
                               std::int64_t tau_max_ps, std::int64_t bin_width_ps,
                               unsigned threads) {
  const auto ta = stream.channel_times(a);
  CorrelateOptions options;
  options.duration_ps = stream.duration_ps();
  options.threads = threads;
  CorrelationHistogram hist;
  if (a == b) {
    options.autocorrelation = true;
    hist = correlate(ta, ta, tau_max_ps, bin_width_ps, options);
  } else {
    const auto tb = stream.channel_times(b);
    hist = correlate(ta, tb, tau_max_ps, bin_width_ps, options);
  }
  hist.channel_a = a;
  hist.channel_b = b;
  return hist;
}

void apply_norm_window(CorrelationHistogram& hist, double norm_window_ps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (std::abs(hist.center(i)) >= norm_window_ps) {
      sum += static_cast<double>(hist.counts[i]);
      ++n;
    }
  }
  if (n == 0) throw ValidationError("normalization window exceeds the histogram span");
  if (!(sum > 0.0)) throw NumericalError("no coincidences inside the normalization window");
  hist.normalization = sum / static_cast<double>(n);
  hist.norm_window_ps = norm_window_ps;
}

PulseBinned pulse_bin(const CorrelationHistogram& hist, std::int64_t rep_period_ps,
                      bool exclude_central, double norm_window_us) {
  if (hist.log_spaced || hist.size() == 0) {
    throw ValidationError("pulse_bin: requires a linear correlation histogram");
  }
  if (rep_period_ps <= 0) throw ValidationError("pulse_bin: rep_period must be > 0");
  const auto w = static_cast<std::int64_t>(std::llround(hist.width(0)));
  if (rep_period_ps % w != 0) {
    throw ValidationError("pulse_bin: the repetition period must be a multiple of the bin width");
  }
  const auto k_max = static_cast<std::int64_t>(hist.size() / 2);
  const std::int64_t P = rep_period_ps;
  // Pulse windows fully inside the histogram: (2|m| + 1) P <= (2K + 1) w.
  const std::int64_t windows = (2 * k_max + 1) * w / P;
  if (windows < 1) throw ValidationError("pulse_bin: histogram is narrower than one period");
  const std::int64_t m_max = (windows - 1) / 2;

  std::vector<double> raw(static_cast<std::size_t>(2 * m_max + 1), 0.0);
  auto add = [&](std::int64_t m, double value) {
    if (std::abs(m) <= m_max) raw[static_cast<std::size_t>(m + m_max)] += value;
  };
  for (std::size_t j = 0; j < hist.size(); ++j) {
    const std::int64_t c = (static_cast<std::int64_t>(j) - k_max) * w;
    const std::int64_t ac = std::abs(c);
    const std::int64_t sign = c < 0 ? -1 : 1;
    const std::int64_t m = sign * ((2 * ac + P) / (2 * P));
    const auto value = static_cast<double>(hist.counts[j]);
    if ((2 * ac + P) % (2 * P) == 0) {
      // Bin centered on the boundary between two pulse windows.
      add(m, 0.5 * value);
      add(m - sign, 0.5 * value);
    } else {
      add(m, value);
    }
  }

  const double T = static_cast<double>(hist.duration_ps);
  const double norm_window_ps = norm_window_us * 1e6;
  PulseBinned out;
  out.rep_period_ps = P;
  std::vector<PulsePeak> peaks;
  double norm_sum = 0.0;
  std::size_t norm_n = 0;
  for (std::int64_t m = -m_max; m <= m_max; ++m) {
    PulsePeak peak;
    peak.pulse_index = m;
    peak.tau_ps = static_cast<double>(m * P);
    peak.raw = raw[static_cast<std::size_t>(m + m_max)];
    const double edge = T > std::abs(peak.tau_ps) ? T / (T - std::abs(peak.tau_ps)) : 1.0;
    peak.g2 = peak.raw * edge;
    peak.sigma = std::sqrt(std::max(peak.raw, 1.0)) * edge;
    if (std::abs(peak.tau_ps) >= norm_window_ps) {
      norm_sum += peak.g2;
      ++norm_n;
    }
    peaks.push_back(peak);
  }
  if (norm_n == 0) {
    throw ValidationError("pulse_bin: normalization window exceeds the histogram span");
  }
  out.normalization = norm_sum / static_cast<double>(norm_n);
  if (!(out.normalization > 0.0)) {
    throw NumericalError("pulse_bin: no coincidences inside the normalization window");
  }
  for (auto& p : peaks) {
    if (exclude_central && p.pulse_index == 0) continue;
    p.g2 /= out.normalization;
    p.sigma /= out.normalization;
    out.peaks.push_back(p);
  }
  return out;
}

CorrelationHistogram log_correlate(std::span<const std::int64_t> a,
                                   std::span<const std::int64_t> b, std::int64_t tau_min_ps,
                                   std::int64_t tau_max_ps, int points_per_decade,
                                   std::int64_t resolution_ps, std::int64_t duration_ps) {
  if (a.empty() || b.empty()) throw ValidationError("log_correlate: both channels must be non-empty");
  if (resolution_ps <= 0) throw ValidationError("log_correlate: resolution must be > 0");
  if (tau_min_ps < resolution_ps) {
    throw ValidationError("log_correlate: tau_min is below the bin resolution");
  }
  if (tau_max_ps <= tau_min_ps) throw ValidationError("log_correlate: requires tau_min < tau_max");
  if (points_per_decade < 4) throw ValidationError("log_correlate: points_per_decade must be >= 4");
  require_sorted(a, "a");
  require_sorted(b, "b");

  // Edge m * resolution - resolution / 2, stored as the integer m.
  std::vector<std::int64_t> edge_units;
  const double decades = std::log10(static_cast<double>(tau_max_ps) / tau_min_ps);
  const int n_points = static_cast<int>(std::ceil(decades * points_per_decade - 1e-9));
  for (int i = 0; i <= n_points; ++i) {
    const double x = i == n_points ? static_cast<double>(tau_max_ps)
                                   : tau_min_ps * std::pow(10.0, double(i) / points_per_decade);
    const auto m = static_cast<std::int64_t>(std::llround(x / resolution_ps));
    if (edge_units.empty() || m > edge_units.back()) edge_units.push_back(m);
  }
  if (edge_units.size() < 2) throw ValidationError("log_correlate: delay range holds no bins");

  const std::size_t n_edges = edge_units.size();
  const std::size_t n_bins = n_edges - 1;
  // Integer delay thresholds: d >= m * res - res / 2  <=>  d >= ceil(...).
  std::vector<std::int64_t> threshold(n_edges);
  CorrelationHistogram hist;
  hist.log_spaced = true;
  hist.tags_a = a.size();
  hist.tags_b = b.size();
  hist.duration_ps = duration_ps > 0 ? duration_ps : default_duration(a, b);
  hist.bin_edges_ps.resize(n_edges);
  for (std::size_t e = 0; e < n_edges; ++e) {
    const std::int64_t twice = 2 * edge_units[e] * resolution_ps - resolution_ps;
    hist.bin_edges_ps[e] = 0.5 * static_cast<double>(twice);
    threshold[e] = twice >= 0 ? (twice + 1) / 2 : -((-twice) / 2);
  }

  hist.counts.assign(n_bins, 0);
  std::vector<std::size_t> ptr(n_edges, 0);
  const std::size_t nb = b.size();
  for (const std::int64_t ta : a) {
    for (std::size_t e = 0; e < n_edges; ++e) {
      const std::int64_t limit = ta + threshold[e];
      std::size_t p = std::max(ptr[e], e > 0 ? ptr[e - 1] : std::size_t{0});
      while (p < nb && b[p] < limit) ++p;
      ptr[e] = p;
    }
    for (std::size_t k = 0; k < n_bins; ++k) hist.counts[k] += ptr[k + 1] - ptr[k];
  }

  const double T = static_cast<double>(hist.duration_ps);
  const double pairs = static_cast<double>(a.size()) * static_cast<double>(b.size());
  hist.uncorrelated.resize(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double e0 = std::min(hist.bin_edges_ps[k], T);
    const double e1 = std::min(hist.bin_edges_ps[k + 1], T);
    hist.uncorrelated[k] = pairs * ((e1 - e0) * T - 0.5 * (e1 * e1 - e0 * e0)) / (T * T);
  }
  return hist;
}

CorrelationHistogram log_correlate(const TimeTagStream& stream, Channel a, Channel b,
                                   std::int64_t tau_min_ps, std::int64_t tau_max_ps,
                                   int points_per_decade, std::int64_t resolution_ps) {
  const auto ta = stream.channel_times(a);
  CorrelationHistogram hist;
  if (a == b) {
    hist = log_correlate(ta, ta, tau_min_ps, tau_max_ps, points_per_decade, resolution_ps,
                         stream.duration_ps());
    // Self pairs sit at zero delay, outside every positive bin; the
    // uncorrelated expectation uses N (N - 1) pairs.
    const double n = static_cast<double>(ta.size());
    for (auto& u : hist.uncorrelated) u *= (n - 1) / n;
  } else {
    const auto tb = stream.channel_times(b);
    hist = log_correlate(ta, tb, tau_min_ps, tau_max_ps, points_per_decade, resolution_ps,
                         stream.duration_ps());
  }
  hist.channel_a = a;
  hist.channel_b = b;
  return hist;
}

namespace {

double normal_cdf(double x, double mean, double sigma) {
  return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0)));
}

struct Mixture {
  double weight[2];
  double mean[2];
  double sigma[2];
};

// Two-component EM on integer-valued samples grouped by value.
Mixture fit_two_gaussians(const std::vector<std::pair<double, double>>& values, double mean) {
  Mixture mix{};
  double n_lo = 0, n_hi = 0, s_lo = 0, s_hi = 0, q_lo = 0, q_hi = 0;
  for (const auto& [x, n] : values) {
    if (x < mean) {
      n_lo += n, s_lo += n * x, q_lo += n * x * x;
    } else {
      n_hi += n, s_hi += n * x, q_hi += n * x * x;
    }
  }
  const double total = n_lo + n_hi;
  constexpr double kMinVar = 0.25;  // counts are integers
  auto init = [&](int c, double nn, double s, double q) {
    mix.weight[c] = std::max(nn, 1.0) / total;
    mix.mean[c] = nn > 0 ? s / nn : mean;
    mix.sigma[c] = std::sqrt(std::max(nn > 0 ? q / nn - mix.mean[c] * mix.mean[c] : 1.0, kMinVar));
  };
  init(0, n_lo, s_lo, q_lo);
  init(1, n_hi, s_hi, q_hi);

  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 500; ++it) {
    double acc_n[2] = {0, 0}, acc_s[2] = {0, 0}, acc_q[2] = {0, 0};
    double loglik = 0.0;
    for (const auto& [x, n] : values) {
      double p[2];
      for (int c = 0; c < 2; ++c) {
        const double z = (x - mix.mean[c]) / mix.sigma[c];
        p[c] = mix.weight[c] * std::exp(-0.5 * z * z) / mix.sigma[c];
      }
      const double sum = p[0] + p[1];
      if (!(sum > 0.0)) continue;
      loglik += n * std::log(sum);
      for (int c = 0; c < 2; ++c) {
        const double r = n * p[c] / sum;
        acc_n[c] += r;
        acc_s[c] += r * x;
        acc_q[c] += r * x * x;
      }
    }
    for (int c = 0; c < 2; ++c) {
      if (acc_n[c] <= 0.0) continue;
      mix.weight[c] = acc_n[c] / total;
      mix.mean[c] = acc_s[c] / acc_n[c];
      mix.sigma[c] = std::sqrt(std::max(acc_q[c] / acc_n[c] - mix.mean[c] * mix.mean[c], kMinVar));
    }
    if (std::abs(loglik - previous) < 1e-10 * std::abs(loglik)) break;
    previous = loglik;
  }
  return mix;
}

}  // namespace

TraceCheck gaussian_trace_check(std::span<const std::uint64_t> counts, double improvement_factor) {
  if (counts.size() < 100) throw ValidationError("gaussian_trace_check: requires >= 100 bins");
  const double n = static_cast<double>(counts.size());
  double sum = 0.0, sum2 = 0.0;
  for (auto c : counts) {
    sum += static_cast<double>(c);
    sum2 += static_cast<double>(c) * static_cast<double>(c);
  }
  TraceCheck out;
  out.mean = sum / n;
  const double var = (sum2 - n * out.mean * out.mean) / (n - 1);
  if (!(var > 0.0)) throw NumericalError("gaussian_trace_check: trace is constant");
  out.sigma = std::sqrt(var);

  const auto [min_it, max_it] = std::minmax_element(counts.begin(), counts.end());
  const double lo = static_cast<double>(*min_it);
  const double hi = static_cast<double>(*max_it);
  const double target_bins = std::clamp(std::sqrt(n), 10.0, 100.0);
  const double width = std::max(1.0, std::ceil((hi - lo + 1.0) / target_bins));
  const auto n_bins = static_cast<std::size_t>(std::ceil((hi - lo + 1.0) / width));
  std::vector<double> observed(n_bins, 0.0);
  for (auto c : counts) {
    const auto i = static_cast<std::size_t>((static_cast<double>(c) - lo) / width);
    observed[std::min(i, n_bins - 1)] += 1.0;
  }

  std::vector<std::pair<double, double>> grouped;
  {
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      grouped.emplace_back(static_cast<double>(sorted[i]), static_cast<double>(j - i));
      i = j;
    }
  }
  const Mixture mix = fit_two_gaussians(grouped, out.mean);

  double chi2_one = 0.0, chi2_two = 0.0;
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double e0 = lo - 0.5 + static_cast<double>(i) * width;
    const double e1 = e0 + width;
    const double one = n * (normal_cdf(e1, out.mean, out.sigma) - normal_cdf(e0, out.mean, out.sigma));
    double two = 0.0;
    for (int c = 0; c < 2; ++c) {
      two += mix.weight[c] * (normal_cdf(e1, mix.mean[c], mix.sigma[c]) -
                              normal_cdf(e0, mix.mean[c], mix.sigma[c]));
    }
    two *= n;
    chi2_one += (observed[i] - one) * (observed[i] - one) / std::max(one, 1.0);
    chi2_two += (observed[i] - two) * (observed[i] - two) / std::max(two, 1.0);
  }
  const double dof_one = std::max(1.0, static_cast<double>(n_bins) - 3.0);
  const double dof_two = std::max(1.0, static_cast<double>(n_bins) - 6.0);
  out.chi2_per_dof = chi2_one / dof_one;
  out.two_gaussian_chi2_per_dof = chi2_two / dof_two;
  out.bimodal = out.chi2_per_dof > improvement_factor * out.two_gaussian_chi2_per_dof;
  return out;
}

}  // namespace qdb
