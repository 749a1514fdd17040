#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sml/errors.hpp"

namespace sml {

// Uniform grid on [t_start, t_end] with n_points >= 2 abscissae.
struct Grid {
  double t_start;
  double t_end;
  std::size_t n_points;

  Grid(double start, double end, std::size_t n)
      : t_start(start), t_end(end), n_points(n) {
    if (n < 2) throw UsageError("Grid: n_points must be >= 2");
    if (!(end > start)) throw UsageError("Grid: t_end must exceed t_start");
    if (start < 0) throw UsageError("Grid: t_start must be >= 0");
  }

  double step() const { return (t_end - t_start) / static_cast<double>(n_points - 1); }

  double point(std::size_t i) const {
    return t_start + (t_end - t_start) * static_cast<double>(i) /
                         static_cast<double>(n_points - 1);
  }
};

struct RegressionFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::size_t n_points = 0;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch for a symmetric weight: the Jacobi matrix has zero diagonal,
// so nodes come in +/- pairs. Pairs are re-symmetrized exactly so that odd
// integrands cancel to 0 in floating point.
inline QuadratureRule golub_welsch_symmetric(const std::vector<double>& offdiag,
                                             double mu0) {
  const std::size_t n = offdiag.size() + 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sub(static_cast<Eigen::Index>(n - 1));
  for (std::size_t k = 0; k + 1 < n; ++k) sub(static_cast<Eigen::Index>(k)) = offdiag[k];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw NumericalError("quadrature rule: tridiagonal eigendecomposition failed");

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
    const double v0 = solver.eigenvectors()(0, static_cast<Eigen::Index>(i));
    rule.weights[i] = mu0 * v0 * v0;
  }
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

inline const QuadratureRule& cached_rule(std::map<std::size_t, QuadratureRule>& cache,
                                         std::mutex& mutex, std::size_t n,
                                         QuadratureRule (*build)(std::size_t)) {
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build(n)).first;
  return it->second;
}

// (He_n(x), He_{n-1}(x)) by the three-term recurrence.
inline std::pair<double, double> hermite_pair(std::size_t n, double x) {
  double prev = 1.0;
  double cur = x;
  for (std::size_t k = 1; k < n; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

// Newton-polishes the eigenvalue nodes of the Hermite Jacobi matrix and
// recomputes the weights as w_i = n! / (n^2 He_{n-1}(x_i)^2). The eigen
// decomposition alone leaves ~1e-8 absolute error in high-order
// orthogonality checks; polishing takes it to roundoff. Restricted to
// n <= 80 where He_{n-1}(x_i)^2 stays inside double range.
inline void polish_hermite_rule(QuadratureRule& rule) {
  const std::size_t n = rule.nodes.size();
  if (n < 2 || n > 80) return;
  double factorial = 1.0;
  for (std::size_t k = 2; k <= n; ++k) factorial *= static_cast<double>(k);
  const double n2 = static_cast<double>(n) * static_cast<double>(n);

  for (std::size_t i = (n + 1) / 2; i < n; ++i) {
    double x = rule.nodes[i];
    for (int step = 0; step < 4; ++step) {
      const auto [value, lower] = hermite_pair(n, x);
      const double deriv = static_cast<double>(n) * lower;
      if (deriv == 0.0) break;
      x -= value / deriv;
    }
    const auto [value_unused, lower] = hermite_pair(n, x);
    (void)value_unused;
    const double w = factorial / (n2 * lower * lower);
    rule.nodes[i] = x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = -x;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    const std::size_t mid = n / 2;
    rule.nodes[mid] = 0.0;
    const auto [value_unused, lower] = hermite_pair(n, 0.0);
    (void)value_unused;
    rule.weights[mid] = factorial / (n2 * lower * lower);
  }
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
}

}  // namespace detail

// Probabilists' Gauss-Hermite rule: integrates against the standard normal
// density, sum(w) == 1.
inline const QuadratureRule& gauss_hermite_rule(std::size_t n) {
  if (n == 0) throw UsageError("gauss_hermite_rule: need at least one node");
  static std::map<std::size_t, QuadratureRule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, n, +[](std::size_t m) {
    std::vector<double> offdiag(m - 1);
    for (std::size_t k = 1; k < m; ++k) offdiag[k - 1] = std::sqrt(static_cast<double>(k));
    QuadratureRule rule = detail::golub_welsch_symmetric(offdiag, 1.0);
    detail::polish_hermite_rule(rule);
    return rule;
  });
}

// Gauss-Legendre rule on [-1, 1], sum(w) == 2.
inline const QuadratureRule& gauss_legendre_rule(std::size_t n) {
  if (n == 0) throw UsageError("gauss_legendre_rule: need at least one node");
  static std::map<std::size_t, QuadratureRule> cache;
  static std::mutex mutex;
  return detail::cached_rule(cache, mutex, n, +[](std::size_t m) {
    std::vector<double> offdiag(m - 1);
    for (std::size_t k = 1; k < m; ++k) {
      const double kk = static_cast<double>(k);
      offdiag[k - 1] = kk / std::sqrt(4.0 * kk * kk - 1.0);
    }
    return detail::golub_welsch_symmetric(offdiag, 2.0);
  });
}

// E[g(Z)], Z ~ N(0,1). Node pairs (+x, -x) are accumulated together with
// compensated summation, which makes odd integrands integrate to exactly 0.
inline double gauss_hermite_expectation(const std::function<double(double)>& g,
                                        std::size_t n_nodes = 64) {
  const QuadratureRule& rule = gauss_hermite_rule(n_nodes);
  const std::size_t n = rule.nodes.size();
  auto eval = [&](std::size_t i) {
    const double v = g(rule.nodes[i]);
    if (!std::isfinite(v))
      throw NumericalError("gauss_hermite_expectation: integrand not finite at node");
    return v;
  };
  double sum = 0.0, comp = 0.0;
  auto add = [&](double term) {
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  };
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t j = n - 1 - i;
    add(rule.weights[i] * (eval(i) + eval(j)));
  }
  if (n % 2 == 1) {
    const std::size_t mid = n / 2;
    add(rule.weights[mid] * eval(mid));
  }
  return sum;
}

// Trapezoid rule over a uniform grid; exact for affine integrands.
inline double grid_integral(std::span<const double> values, const Grid& grid) {
  if (values.size() != grid.n_points)
    throw UsageError("grid_integral: values length must equal grid.n_points");
  double sum = 0.0, comp = 0.0;
  auto add = [&](double term) {
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  };
  add(0.5 * values.front());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) add(values[i]);
  add(0.5 * values.back());
  return sum * grid.step();
}

// ∫_a^b f by an n-point Gauss-Legendre rule.
inline double integrate_gauss_legendre(const std::function<double(double)>& f,
                                       double a, double b, std::size_t n = 256) {
  const QuadratureRule& rule = gauss_legendre_rule(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

// Least-squares fit of log y on log x; the slope estimates a power-law
// exponent.
inline RegressionFit loglog_slope(std::span<const double> xs,
                                  std::span<const double> ys) {
  if (xs.size() != ys.size()) throw UsageError("loglog_slope: length mismatch");
  if (xs.size() < 3) throw UsageError("loglog_slope: need at least 3 points");
  const std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0) || !(ys[i] > 0))
      throw DomainError("loglog_slope: entries must be strictly positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = lx[i] - mx;
    const double dy = ly[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0)) throw DomainError("loglog_slope: abscissae are degenerate");

  RegressionFit fit;
  fit.n_points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ssr += r * r;
  }
  const double scale = std::max(1.0, my * my) * static_cast<double>(n);
  if (syy <= 1e-24 * scale) {
    fit.r_squared = 1.0;  // constant ys up to roundoff: the horizontal fit is exact
  } else {
    fit.r_squared = std::clamp(1.0 - ssr / syy, 0.0, 1.0);
  }
  return fit;
}

}  // namespace sml
