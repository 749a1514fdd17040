#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sml/errors.hpp"
#include "sml/rng.hpp"

namespace sml {

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Inverse standard normal CDF: Acklam's rational approximation polished by
// one Halley step against the erfc-based CDF (~1e-15 accurate).
inline double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw DomainError("normal_quantile: p must lie in (0,1)");
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

enum class DistanceMethod { kW1, kKs };

struct DistanceEstimate {
  double value = 0;
  double standard_error = 0;
  std::size_t n = 0;
  DistanceMethod method = DistanceMethod::kW1;
};

inline constexpr std::size_t kBootstrapResamples = 64;

namespace detail {

// W1 distance between the empirical CDF of sorted standardized samples and
// the standard normal: the L1 distance of CDFs, integrated exactly between
// order statistics via A(z) = z Phi(z) + phi(z) (so A' = Phi), with analytic
// tails beyond the extreme order statistics.
inline double w1_sorted_standardized(const std::vector<double>& z) {
  const std::size_t n = z.size();
  auto big_a = [](double x) { return x * normal_cdf(x) + normal_pdf(x); };

  double total = big_a(z.front());  // left tail: integral of Phi up to z_(1)
  for (std::size_t i = 1; i < n; ++i) {
    const double lo = z[i - 1];
    const double hi = z[i];
    if (!(hi > lo)) continue;
    const double level = static_cast<double>(i) / static_cast<double>(n);
    const double a_lo = big_a(lo);
    const double a_hi = big_a(hi);
    const double cross = normal_quantile(level);
    if (cross <= lo) {
      total += (a_hi - a_lo) - level * (hi - lo);
    } else if (cross >= hi) {
      total += level * (hi - lo) - (a_hi - a_lo);
    } else {
      const double a_cr = big_a(cross);
      total += level * (cross - lo) - (a_cr - a_lo);
      total += (a_hi - a_cr) - level * (hi - cross);
    }
  }
  // right tail: integral of 1 - Phi beyond z_(n)
  total += normal_pdf(z.back()) - z.back() * (1.0 - normal_cdf(z.back()));
  return total;
}

inline double ks_sorted_standardized(const std::vector<double>& z) {
  const std::size_t n = z.size();
  double stat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = normal_cdf(z[i]);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - cdf;
    const double lo = cdf - static_cast<double>(i) / static_cast<double>(n);
    stat = std::max(stat, std::max(hi, lo));
  }
  return stat;
}

template <typename Statistic>
DistanceEstimate distance_with_bootstrap(std::span<const double> samples,
                                         double mu, double sigma,
                                         std::uint64_t bootstrap_seed,
                                         DistanceMethod method,
                                         Statistic statistic, double scale) {
  if (samples.size() < 2)
    throw UsageError("distance estimate: need at least 2 samples");
  if (!(sigma > 0)) throw DomainError("distance estimate: sigma must be > 0");

  const std::size_t n = samples.size();
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (samples[i] - mu) / sigma;
  std::sort(z.begin(), z.end());

  DistanceEstimate est;
  est.method = method;
  est.n = n;
  est.value = scale * statistic(z);

  std::vector<double> replicate(kBootstrapResamples);
  std::vector<double> resample(n);
  for (std::size_t b = 0; b < kBootstrapResamples; ++b) {
    RngStream stream = derive_stream(bootstrap_seed, b, stream_tag::kBootstrap);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(stream.next_u64() % n);
      resample[i] = z[idx];
    }
    std::sort(resample.begin(), resample.end());
    replicate[b] = scale * statistic(resample);
  }
  double mean = 0.0;
  for (double v : replicate) mean += v;
  mean /= static_cast<double>(kBootstrapResamples);
  double ss = 0.0;
  for (double v : replicate) ss += (v - mean) * (v - mean);
  est.standard_error = std::sqrt(ss / static_cast<double>(kBootstrapResamples - 1));
  return est;
}

}  // namespace detail

// Wasserstein-1 distance between the sample law and N(mu, sigma^2),
// estimated as the L1 distance between CDFs; SE by 64-fold bootstrap.
inline DistanceEstimate empirical_w1_to_normal(std::span<const double> samples,
                                               double mu, double sigma,
                                               std::uint64_t bootstrap_seed = 0) {
  return detail::distance_with_bootstrap(samples, mu, sigma, bootstrap_seed,
                                         DistanceMethod::kW1,
                                         detail::w1_sorted_standardized, sigma);
}

// One-sample Kolmogorov-Smirnov statistic against N(mu, sigma^2).
inline DistanceEstimate ks_to_normal(std::span<const double> samples, double mu,
                                     double sigma,
                                     std::uint64_t bootstrap_seed = 0) {
  return detail::distance_with_bootstrap(samples, mu, sigma, bootstrap_seed,
                                         DistanceMethod::kKs,
                                         detail::ks_sorted_standardized, 1.0);
}

}  // namespace sml
