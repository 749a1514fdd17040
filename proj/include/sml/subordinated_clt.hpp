#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sml/distance.hpp"
#include "sml/errors.hpp"
#include "sml/gaussian_processes.hpp"
#include "sml/hermite.hpp"
#include "sml/mc_engine.hpp"
#include "sml/numerics.hpp"
#include "sml/rng.hpp"

namespace sml {

enum class DecayRegime { kIntegrable, kTvTo0, kTvPrimeTo0 };

inline const char* to_string(DecayRegime regime) {
  switch (regime) {
    case DecayRegime::kIntegrable:
      return "integrable";
    case DecayRegime::kTvTo0:
      return "tv_to_0";
    case DecayRegime::kTvPrimeTo0:
      return "tvprime_to_0";
  }
  return "?";
}

// Power-law decay model V(T) = K T^{-alpha} with C(T)/V(T) -> M. Fits use
// the K = 1 normalization, so M carries the amplitude of the tail.
struct DecayModel {
  bool integrable = false;
  double alpha = 0;
  double K = 1.0;
  double M = 0;
  DecayRegime regime = DecayRegime::kIntegrable;
};

struct CltReport {
  double T = 0;
  double sigma_sq_limit = 0;
  double predicted_rate = 0;
  double bound_term_1 = 0;  // fourth moment of the first derivative's norm
  double bound_term_2 = 0;  // contraction norm
  double empirical_variance = 0;
  DistanceEstimate empirical_dw;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

// Verifies the covariance-decay hypothesis on the tail window
// [T_max/4, T_max]: log|C| must regress on log T with r^2 >= 0.99. Fits with
// K = 1, M = sign * exp(intercept). alpha near 1 is rejected as ambiguous
// between the two non-integrable sub-regimes.
inline DecayModel fit_condition_star(const StationaryCovariance& model,
                                     double t_max) {
  if (!(t_max >= 16)) throw UsageError("fit_condition_star: T_max must be >= 16");

  constexpr std::size_t kLags = 33;
  std::vector<double> lags(kLags), abs_cov(kLags);
  const double lo = t_max / 4.0;
  int sign = 0;
  for (std::size_t i = 0; i < kLags; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(kLags - 1);
    lags[i] = lo * std::pow(t_max / lo, frac);
    const double c = model(lags[i]);
    if (std::abs(c) < 1e-14 * model.c0())
      throw TheoremError(
          "fit_condition_star: covariance tail is degenerate (|C| ~ 0; M = 0)");
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign)
      throw TheoremError(
          "fit_condition_star: covariance tail changes sign; no power law");
    abs_cov[i] = std::abs(c);
  }

  const RegressionFit fit = loglog_slope(lags, abs_cov);
  if (fit.r_squared < 0.99)
    throw TheoremError("fit_condition_star: tail is not a power law (r^2 = " +
                       std::to_string(fit.r_squared) + ")");

  DecayModel decay;
  decay.alpha = -fit.slope;
  decay.K = 1.0;
  decay.M = static_cast<double>(sign) * std::exp(fit.intercept);
  if (!(decay.alpha > 0))
    throw TheoremError("fit_condition_star: covariance does not decay");
  if (decay.alpha >= 0.98 && decay.alpha <= 1.02)
    throw TheoremError(
        "fit_condition_star: alpha within [0.98, 1.02]; the borderline decay "
        "rate is rejected as ambiguous");
  if (std::abs(decay.M) < 1e-12)
    throw TheoremError("fit_condition_star: fitted M is degenerate (~0)");

  if (decay.alpha > 1.0) {
    decay.integrable = true;
    decay.regime = DecayRegime::kTvTo0;
  } else {
    decay.integrable = false;
    decay.regime = DecayRegime::kTvPrimeTo0;
  }
  return decay;
}

// Normalizer: T in the integrable case, double integral of V otherwise
// (closed form K T^{2-alpha} / ((1-alpha)(2-alpha)) for the power law).
inline double v_tilde(const DecayModel& decay, double t) {
  if (!(t > 0)) throw DomainError("v_tilde: T must be > 0");
  if (decay.integrable) return t;
  if (!(decay.alpha < 1.0))
    throw UsageError("v_tilde: non-integrable model requires alpha in (0,1)");
  return decay.K * std::pow(t, 2.0 - decay.alpha) /
         ((1.0 - decay.alpha) * (2.0 - decay.alpha));
}

// Limiting variance of F_T, with exp the expansion of the standardized
// subordinator f(sqrt(C(0)) z). Non-integrable: 2 M c_1^2 / C(0), since the
// coefficients pair with the correlation C/C(0). Integrable:
// sum_q c_q^2 q! * 2 int_0^inf (C(t)/C(0))^q dt, integrated on a fine grid
// with a power-law tail correction.
inline double limiting_variance(const StationaryCovariance& model,
                                const DecayModel& decay,
                                const HermiteExpansion& exp) {
  if (exp.c.size() < 2) throw UsageError("limiting_variance: expansion too short");
  if (!decay.integrable) {
    const double c1 = exp.c[1];
    if (std::abs(c1) <= 1e-10)
      throw TheoremError(
          "limiting_variance: E[f(Z)Z] = 0 with non-integrable covariance; f "
          "is outside the admissible class");
    return 2.0 * decay.M * c1 * c1 / model.c0();
  }

  // C^q may have cusps at small lags (fGn below H = 1/2), so the head
  // [0, 4] is integrated on a much finer grid than the smooth tail.
  const double t_cut = 4096.0;
  const Grid head(0.0, 4.0, 1 << 13);
  const Grid tail_grid(4.0, t_cut, 1 << 16);
  const double c0 = model.c0();
  std::vector<double> cov_head(head.n_points), cov_tail(tail_grid.n_points);
  for (std::size_t i = 0; i < head.n_points; ++i)
    cov_head[i] = model(head.point(i)) / c0;
  for (std::size_t i = 0; i < tail_grid.n_points; ++i)
    cov_tail[i] = model(tail_grid.point(i)) / c0;

  double total = 0.0;
  double qfact = 1.0;
  std::vector<double> pow_head(cov_head), pow_tail(cov_tail);
  for (std::size_t q = 1; q < exp.c.size(); ++q) {
    qfact *= static_cast<double>(q);
    if (q > 1) {
      for (std::size_t i = 0; i < pow_head.size(); ++i) pow_head[i] *= cov_head[i];
      for (std::size_t i = 0; i < pow_tail.size(); ++i) pow_tail[i] *= cov_tail[i];
    }
    const double weight = exp.c[q] * exp.c[q] * qfact;
    if (weight == 0.0) continue;
    double integral = grid_integral(pow_head, head) + grid_integral(pow_tail, tail_grid);
    const double qa = static_cast<double>(q) * decay.alpha;
    if (qa > 1.0)  // tail of (M/C(0))^q t^{-q alpha} beyond the cut
      integral += std::pow(decay.M / c0, static_cast<double>(q)) *
                  std::pow(t_cut, 1.0 - qa) / (qa - 1.0);
    total += weight * 2.0 * integral;
  }
  if (!(total > 0))
    throw TheoremError("limiting_variance: limit variance is not positive");
  return total;
}

// Normalized convergence-rate prediction: T^{-1/4} for integrable
// covariance, (K max{1, alpha} T^{-alpha})^{1/4} in the TV'->0 regime.
inline double predicted_rate(const DecayModel& decay, double t) {
  if (!(t > 0)) throw DomainError("predicted_rate: T must be > 0");
  if (decay.integrable) return std::pow(t, -0.25);
  if (decay.regime != DecayRegime::kTvPrimeTo0 || !(decay.alpha < 1.0))
    throw UsageError("predicted_rate: inconsistent non-integrable decay model");
  return std::pow(decay.K * std::max(1.0, decay.alpha) * std::pow(t, -decay.alpha),
                  0.25);
}

inline double predicted_rate_exponent(const DecayModel& decay) {
  return decay.integrable ? -0.25 : -decay.alpha / 4.0;
}

// n realizations of F_T = Vtilde(T)^{-1/2} int_0^T (f(X_t) - E f(Z)) dt,
// Z ~ N(0, C(0)). Deterministic per (model, grid, n, seed) and worker count.
inline std::vector<double> simulate_F_T(const StationaryCovariance& model,
                                        const SubordinatorFunction& f,
                                        const DecayModel& decay, double t_horizon,
                                        double dt, std::size_t n,
                                        std::uint64_t seed, unsigned workers = 1) {
  if (!(dt > 0) || dt > 1.0)
    throw DomainError("simulate_F_T: need 0 < dt <= 1 for covariance resolution");
  if (n < 2) throw UsageError("simulate_F_T: need n >= 2");
  if (!(t_horizon > dt)) throw DomainError("simulate_F_T: T must exceed dt");

  const std::size_t n_points =
      static_cast<std::size_t>(std::floor(t_horizon / dt + 0.5)) + 1;
  const Grid grid(0.0, t_horizon, n_points);
  StationaryPathSampler sampler(model, grid);

  const double sd0 = std::sqrt(model.c0());
  const double center =
      gauss_hermite_expectation([&](double z) { return f.eval(sd0 * z); });
  const double norm = 1.0 / std::sqrt(v_tilde(decay, t_horizon));

  std::vector<double> samples(n);
  parallel_for(n, workers, 8, [&](std::size_t i) {
    RngStream stream = derive_stream(seed, i, stream_tag::kSubordinated);
    std::vector<double> path(grid.n_points);
    sampler.sample_path(stream, path);
    for (double& v : path) v = f.eval(v) - center;
    samples[i] = norm * grid_integral(path, grid);
  });
  return samples;
}

// Closed-form upper bounds for the two Wiener-space conditions:
//   term1 = E|f'(Z)|^4 (Vtilde^{-1} ∫∫ |C(t-s)|)^2
//   term2 = 8 E|f''(Z)|^4 C(0) Vtilde^{-2} T (∫_0^T |C|)^3
inline std::pair<double, double> gaussian_bound_terms(
    const StationaryCovariance& model, const SubordinatorFunction& f,
    const DecayModel& decay, double t_horizon) {
  if (!(t_horizon > 0)) throw DomainError("gaussian_bound_terms: T must be > 0");
  const double sd0 = std::sqrt(model.c0());
  auto moment4 = [&](const std::function<double(double)>& g) {
    return gauss_hermite_expectation([&](double z) {
      const double v = g(sd0 * z);
      return v * v * v * v;
    });
  };
  const double m1 = moment4(f.deriv1);
  const double m2 = moment4(f.deriv2);

  const std::size_t n_points = 1 << 14;
  const Grid grid(0.0, t_horizon, n_points);
  std::vector<double> abs_c(n_points), weighted(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double y = grid.point(i);
    abs_c[i] = std::abs(model(y));
    weighted[i] = (t_horizon - y) * abs_c[i];
  }
  const double int_abs = grid_integral(abs_c, grid);
  const double double_abs = 2.0 * grid_integral(weighted, grid);

  const double vt = v_tilde(decay, t_horizon);
  const double term1 = m1 * (double_abs / vt) * (double_abs / vt);
  const double term2 =
      8.0 * m2 * model.c0() * t_horizon * int_abs * int_abs * int_abs / (vt * vt);
  return {term1, term2};
}

// One row per horizon: simulate, compare the sample law against
// N(0, Sigma^2), and evaluate the closed-form bound terms. exp must be the
// standardized expansion (see standardized_expansion); for unit-variance
// fields it coincides with hermite_coefficients(f).
inline std::vector<CltReport> clt_sweep(const StationaryCovariance& model,
                                        const SubordinatorFunction& f,
                                        const DecayModel& decay,
                                        const HermiteExpansion& exp,
                                        const std::vector<double>& t_list, double dt,
                                        std::size_t n, std::uint64_t seed,
                                        unsigned workers = 1) {
  if (t_list.empty()) throw UsageError("clt_sweep: empty horizon list");
  if (!membership_in_M_C(f, exp, decay.integrable))
    throw TheoremError(
        "clt_sweep: subordinator is outside the admissible class for this "
        "covariance (symmetric f required when integrable, E[f(Z)Z] != 0 "
        "otherwise)");
  const double sigma_sq = limiting_variance(model, decay, exp);

  std::vector<CltReport> reports;
  reports.reserve(t_list.size());
  for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
    const double t_horizon = t_list[ti];
    const std::uint64_t sub_seed = mix64(seed ^ (0xC517ull + ti));
    const std::vector<double> samples =
        simulate_F_T(model, f, decay, t_horizon, dt, n, sub_seed, workers);

    CltReport report;
    report.T = t_horizon;
    report.sigma_sq_limit = sigma_sq;
    report.predicted_rate = predicted_rate(decay, t_horizon);
    const auto [term1, term2] = gaussian_bound_terms(model, f, decay, t_horizon);
    report.bound_term_1 = term1;
    report.bound_term_2 = term2;
    report.empirical_variance = variance_of(samples);
    report.empirical_dw =
        empirical_w1_to_normal(samples, 0.0, std::sqrt(sigma_sq), sub_seed);
    report.n = n;
    report.seed = seed;
    reports.push_back(report);
  }
  return reports;
}

}  // namespace sml
