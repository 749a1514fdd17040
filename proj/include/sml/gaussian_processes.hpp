#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "sml/errors.hpp"
#include "sml/io.hpp"
#include "sml/mc_engine.hpp"
#include "sml/numerics.hpp"
#include "sml/rng.hpp"

namespace sml {

// Unit-lag increments of fractional Brownian motion with Hurst index H.
struct FgnIncrement {
  double hurst;
};

// Stationary solution of the Ornstein-Uhlenbeck equation driven by
// fractional Brownian motion.
struct FracOu {
  double hurst;
  double lambda;
  double sigma_tilde;
};

struct TabulatedCovariance {
  std::vector<double> lags;    // increasing, starting at 0
  std::vector<double> values;  // C at those lags
};

// fBM covariance (|t|^2H + |s|^2H - |t-s|^2H) / 2.
inline double fbm_covariance(double hurst, double t, double s) {
  if (!(hurst > 0.0) || !(hurst < 1.0))
    throw DomainError("fbm_covariance: H must lie in (0,1)");
  if (t < 0 || s < 0) throw DomainError("fbm_covariance: t,s must be >= 0");
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2));
}

namespace detail {

// fGn covariance (|s+1|^2H + |s-1|^2H - 2 s^2H)/2. For s >= 2 the
// differenced binomial series in u = 1/s is used; the direct form loses
// ~ s^2 eps of relative accuracy to cancellation at large lags.
inline double fgn_covariance(double hurst, double t) {
  const double s = std::abs(t);
  const double h2 = 2.0 * hurst;
  if (s == 0.0) return 1.0;
  if (s < 2.0)
    return 0.5 * (std::pow(s + 1.0, h2) + std::pow(std::abs(s - 1.0), h2) -
                  2.0 * std::pow(s, h2));
  const double u = 1.0 / s;
  const double u2 = u * u;
  double binom = h2 * (h2 - 1.0) / 2.0;  // C(2H, 2)
  double upow = u2;
  double sum = binom * upow;
  for (int k = 3; k < 200; k += 2) {
    binom *= (h2 - static_cast<double>(k - 1)) / static_cast<double>(k);
    binom *= (h2 - static_cast<double>(k)) / static_cast<double>(k + 1);
    upow *= u2;
    const double term = binom * upow;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return std::pow(s, h2) * sum;
}

// Exact stationary frac-OU covariance for lag T >= 0, reduced to
//   C(T) = s2 * [ -T^2H/2 + (l/4) P + (l/4) e^{-lT} R + G e^{-lT}/(4 l^2H) ]
// with P = int_0^inf e^{-lq} (T+q)^2H dq, R = int_0^T e^{lu} u^2H du and
// G = Gamma(2H+1). P is integrated by composite 256-point Gauss-Legendre,
// e^{-lT} R by the everywhere-positive series T^{2H+1} e^{-lT}
// sum_k (lT)^k / (k! (2H+1+k)).
inline double frac_ou_covariance_quadrature(double hurst, double lambda,
                                            double sigma_tilde, double lag) {
  const double h2 = 2.0 * hurst;
  const double gamma = std::tgamma(h2 + 1.0);
  const double s2 = sigma_tilde * sigma_tilde;
  if (lag < 1e-14) return s2 * gamma / (2.0 * std::pow(lambda, h2));

  const double cut = 45.0 / lambda;  // e^{-45} tail is below double precision
  const double split = std::min(2.0 / lambda, 0.5 * cut);
  auto integrand_p = [&](double q) {
    return std::exp(-lambda * q) * std::pow(lag + q, h2);
  };
  const double p_val = integrate_gauss_legendre(integrand_p, 0.0, split, 256) +
                       integrate_gauss_legendre(integrand_p, split, cut, 256);

  const double y = lambda * lag;
  double pow_term = 1.0;  // y^k / k!
  double series = 1.0 / (h2 + 1.0);
  for (int k = 1; k < 400; ++k) {
    pow_term *= y / static_cast<double>(k);
    const double contrib = pow_term / (h2 + 1.0 + static_cast<double>(k));
    series += contrib;
    if (contrib <= 1e-18 * series) break;
  }
  const double r_damped = std::exp(-y) * std::pow(lag, h2 + 1.0) * series;

  return s2 * (-0.5 * std::pow(lag, h2) + 0.25 * lambda * p_val +
               0.25 * lambda * r_damped +
               0.25 * gamma * std::exp(-y) / std::pow(lambda, h2));
}

// Large-lag series with optimal truncation; terms are added while they
// shrink, leaving a remainder of order e^{-lambda T}.
inline double frac_ou_covariance_series(double hurst, double lambda,
                                        double sigma_tilde, double lag) {
  const double h2 = 2.0 * hurst;
  double coef = 1.0;
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 60; ++n) {
    coef *= (h2 - static_cast<double>(2 * n - 2)) * (h2 - static_cast<double>(2 * n - 1));
    const double term = coef * std::pow(lambda, -2.0 * n) * std::pow(lag, h2 - 2.0 * n);
    if (std::abs(term) >= prev) break;
    sum += term;
    prev = std::abs(term);
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return 0.5 * sigma_tilde * sigma_tilde * sum;
}

}  // namespace detail

// Truncated large-lag expansion of the frac-OU covariance:
//   (s2/2) sum_{n=1}^N lambda^{-2n} prod_{k=0}^{2n-1}(2H-k) T^{2H-2n}.
inline double frac_ou_covariance_asymptotic(double hurst, double lambda,
                                            double sigma_tilde, std::size_t n_terms,
                                            double lag) {
  if (!(lag > 0)) throw DomainError("frac_ou_covariance_asymptotic: T must be > 0");
  if (hurst == 0.5)
    throw DomainError("frac_ou_covariance_asymptotic: H = 1/2 is excluded");
  if (n_terms < 1)
    throw UsageError("frac_ou_covariance_asymptotic: need at least one term");
  const double h2 = 2.0 * hurst;
  double coef = 1.0;
  double sum = 0.0;
  for (std::size_t n = 1; n <= n_terms; ++n) {
    coef *= (h2 - static_cast<double>(2 * n - 2)) * (h2 - static_cast<double>(2 * n - 1));
    sum += coef * std::pow(lambda, -2.0 * static_cast<double>(n)) *
           std::pow(lag, h2 - 2.0 * static_cast<double>(n));
  }
  return 0.5 * sigma_tilde * sigma_tilde * sum;
}

// A stationary Gaussian covariance model C(t). C is even and |C(t)| <= C(0).
class StationaryCovariance {
 public:
  using Kind = std::variant<FgnIncrement, FracOu, TabulatedCovariance>;

  static StationaryCovariance fgn_increment(double hurst) {
    if (!(hurst > 0.0) || !(hurst < 1.0))
      throw DomainError("fgn_increment: H must lie in (0,1)");
    return StationaryCovariance(FgnIncrement{hurst}, 1.0);
  }

  static StationaryCovariance frac_ou(double hurst, double lambda,
                                      double sigma_tilde) {
    if (!(hurst > 0.0) || !(hurst < 1.0) || hurst == 0.5)
      throw DomainError("frac_ou: H must lie in (0,1) \\ {1/2}");
    if (!(lambda > 0)) throw DomainError("frac_ou: lambda must be > 0");
    if (!(sigma_tilde > 0)) throw DomainError("frac_ou: sigma_tilde must be > 0");
    const double c0 = std::tgamma(2.0 * hurst + 1.0) * sigma_tilde * sigma_tilde /
                      (2.0 * std::pow(lambda, 2.0 * hurst));
    return StationaryCovariance(FracOu{hurst, lambda, sigma_tilde}, c0);
  }

  static StationaryCovariance tabulated(std::vector<double> lags,
                                        std::vector<double> values) {
    if (lags.size() != values.size() || lags.size() < 2)
      throw UsageError("tabulated covariance: need >= 2 matching (lag, value) rows");
    if (lags.front() != 0.0)
      throw UsageError("tabulated covariance: first lag must be 0");
    for (std::size_t i = 1; i < lags.size(); ++i)
      if (!(lags[i] > lags[i - 1]))
        throw UsageError("tabulated covariance: lags must be strictly increasing");
    const double c0 = values.front();
    if (!(c0 > 0)) throw DomainError("tabulated covariance: C(0) must be > 0");
    for (double v : values)
      if (std::abs(v) > c0 * (1.0 + 1e-12))
        throw DomainError("tabulated covariance: |C(t)| must not exceed C(0)");
    return StationaryCovariance(
        TabulatedCovariance{std::move(lags), std::move(values)}, c0);
  }

  static StationaryCovariance tabulated_from_csv(const std::string& path) {
    TwoColumnCsv csv = read_two_column_csv(path);
    return tabulated(std::move(csv.first), std::move(csv.second));
  }

  double c0() const { return c0_; }
  const Kind& kind() const { return kind_; }

  // Largest lag at which C is defined (finite only for tabulated models).
  double max_lag() const {
    if (const auto* tab = std::get_if<TabulatedCovariance>(&kind_))
      return tab->lags.back();
    return std::numeric_limits<double>::infinity();
  }

  // C(t); even extension in t. Frac-OU uses exact quadrature up to
  // lambda*t = 30 and the optimally truncated series beyond, where its
  // remainder e^{-lambda t} undercuts the quadrature's cancellation error.
  double operator()(double t) const {
    const double s = std::abs(t);
    if (const auto* fgn = std::get_if<FgnIncrement>(&kind_))
      return detail::fgn_covariance(fgn->hurst, s);
    if (const auto* fou = std::get_if<FracOu>(&kind_)) {
      if (fou->lambda * s <= 30.0)
        return detail::frac_ou_covariance_quadrature(fou->hurst, fou->lambda,
                                                     fou->sigma_tilde, s);
      return detail::frac_ou_covariance_series(fou->hurst, fou->lambda,
                                               fou->sigma_tilde, s);
    }
    const auto& tab = std::get<TabulatedCovariance>(kind_);
    if (s > tab.lags.back() * (1.0 + 1e-12))
      throw DomainError("tabulated covariance: lag beyond tabulated range");
    const double sc = std::min(s, tab.lags.back());
    auto it = std::upper_bound(tab.lags.begin(), tab.lags.end(), sc);
    if (it == tab.lags.end()) return tab.values.back();
    const std::size_t hi = static_cast<std::size_t>(it - tab.lags.begin());
    if (hi == 0) return tab.values.front();
    const std::size_t lo = hi - 1;
    const double w = (sc - tab.lags[lo]) / (tab.lags[hi] - tab.lags[lo]);
    return tab.values[lo] * (1.0 - w) + tab.values[hi] * w;
  }

 private:
  StationaryCovariance(Kind kind, double c0) : kind_(std::move(kind)), c0_(c0) {}

  Kind kind_;
  double c0_;
};

inline double covariance_eval(const StationaryCovariance& model, double t) {
  return model(t);
}

// Exact draws of the stationary field on a uniform grid.
//
// Route selection:
//  * fGn with 1/h an integer w: the field at grid times is the moving w-sum
//    of step-h fBM increments, whose integer-lag circulant embedding is
//    cleanly nonnegative. Exact in law, O(m log m) per path.
//  * otherwise circulant embedding of C itself (padded to a power of two),
//    accepted when eigenvalue negativity is below roundoff;
//  * otherwise dense Cholesky of the covariance matrix with 1e-12*C(0)
//    diagonal jitter, for grids up to 4096 points.
class StationaryPathSampler {
 public:
  StationaryPathSampler(const StationaryCovariance& model, const Grid& grid)
      : grid_(grid) {
    const std::size_t n = grid.n_points;
    const double h = grid.step();

    if (const auto* fgn = std::get_if<FgnIncrement>(&model.kind())) {
      const double w_real = 1.0 / h;
      const double w_round = std::round(w_real);
      if (w_round >= 1.0 && std::abs(w_real - w_round) < 1e-9 * w_real) {
        window_ = static_cast<std::size_t>(w_round);
        const std::size_t n_incr = n + window_ - 1;
        const double incr_var = std::pow(h, 2.0 * fgn->hurst);
        auto incr_cov = [&](std::size_t k) {
          return incr_var * detail::fgn_covariance(fgn->hurst, static_cast<double>(k));
        };
        if (build_circulant(incr_cov, n_incr)) return;
        window_ = 0;  // clean embedding expected; fall through otherwise
      }
    }

    // beyond a tabulated range the circulant padding is completed with 0;
    // the PSD check decides whether that completion is admissible
    const double max_lag = model.max_lag();
    auto lag_cov = [&](std::size_t k) {
      const double lag = static_cast<double>(k) * h;
      return lag <= max_lag ? model(lag) : 0.0;
    };
    if (build_circulant(lag_cov, n)) return;

    if (n > 4096)
      throw NumericalError(
          "sampling: circulant embedding is indefinite and the grid is too "
          "large for dense factorization");
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double value = lag_cov(i - j);
        cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
        cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
      }
    cov.diagonal().array() += 1e-12 * model.c0();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError(
          "sampling: circulant embedding is indefinite and dense "
          "factorization failed even after diagonal jitter");
    dense_factor_ = llt.matrixL();
  }

  const Grid& grid() const { return grid_; }
  bool uses_circulant() const { return !circulant_scale_.empty(); }
  bool uses_increment_window() const { return window_ > 0; }

  // One exact draw; consumes a fixed number of variates from the stream.
  void sample_path(RngStream& stream, std::span<double> out) const {
    const std::size_t n = grid_.n_points;
    if (out.size() != n) throw UsageError("sample_path: output span size mismatch");
    if (!uses_circulant()) {
      Eigen::VectorXd z(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        z(static_cast<Eigen::Index>(i)) = stream.next_normal();
      Eigen::VectorXd path = dense_factor_.triangularView<Eigen::Lower>() * z;
      for (std::size_t i = 0; i < n; ++i) out[i] = path(static_cast<Eigen::Index>(i));
      return;
    }

    const std::size_t m = circulant_scale_.size();
    thread_local Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in(m), freq(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double a = stream.next_normal();
      const double b = stream.next_normal();
      in[k] = std::complex<double>(circulant_scale_[k] * a, circulant_scale_[k] * b);
    }
    fft.fwd(freq, in);

    if (window_ == 0) {
      for (std::size_t j = 0; j < n; ++j) out[j] = freq[j].real();
      return;
    }
    // moving window sum of increments: X_j = sum of w increments from j
    const std::size_t n_incr = n + window_ - 1;
    std::vector<double> prefix(n_incr + 1, 0.0);
    for (std::size_t j = 0; j < n_incr; ++j) prefix[j + 1] = prefix[j] + freq[j].real();
    for (std::size_t j = 0; j < n; ++j) out[j] = prefix[j + window_] - prefix[j];
  }

 private:
  // Builds the padded circulant for lags 0..count-1 of cov(k); returns false
  // when the embedding has more than roundoff-level negative mass.
  template <typename CovFn>
  bool build_circulant(const CovFn& cov, std::size_t count) {
    std::size_t m = 1;
    while (m < 2 * (count - 1)) m <<= 1;
    std::vector<double> row(m);
    for (std::size_t j = 0; j < m; ++j) row[j] = cov(std::min(j, m - j));

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> freq(m);
    fft.fwd(freq, row);
    double min_ev = std::numeric_limits<double>::infinity();
    double max_ev = 0.0;
    for (const auto& f : freq) {
      min_ev = std::min(min_ev, f.real());
      max_ev = std::max(max_ev, std::abs(f.real()));
    }
    if (min_ev < -1e-9 * max_ev) return false;

    circulant_scale_.resize(m);
    for (std::size_t k = 0; k < m; ++k)
      circulant_scale_[k] =
          std::sqrt(std::max(freq[k].real(), 0.0) / static_cast<double>(m));
    return true;
  }

  Grid grid_;
  std::size_t window_ = 0;  // 0: direct; >= 1: increment moving-sum mode
  std::vector<double> circulant_scale_;
  Eigen::MatrixXd dense_factor_;
};

struct GaussianPathEnsemble {
  Grid grid;
  std::uint64_t seed = 0;
  Eigen::MatrixXd paths;  // one row per path
};

// n independent draws; path i uses the (seed, i) stream, so the ensemble is
// identical for any worker count.
inline GaussianPathEnsemble sample_stationary_paths(const StationaryCovariance& model,
                                                    const Grid& grid, std::size_t n,
                                                    std::uint64_t seed,
                                                    unsigned workers = 1) {
  if (n == 0) throw UsageError("sample_stationary_paths: need n >= 1");
  StationaryPathSampler sampler(model, grid);
  GaussianPathEnsemble ensemble{grid, seed,
                                Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(grid.n_points))};
  parallel_for(n, workers, 16, [&](std::size_t i) {
    RngStream stream = derive_stream(seed, i, stream_tag::kGaussianPath);
    std::vector<double> buffer(grid.n_points);
    sampler.sample_path(stream, buffer);
    for (std::size_t j = 0; j < grid.n_points; ++j)
      ensemble.paths(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buffer[j];
  });
  return ensemble;
}

}  // namespace sml
