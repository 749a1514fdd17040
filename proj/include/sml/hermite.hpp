#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sml/errors.hpp"
#include "sml/numerics.hpp"

namespace sml {

// A C^2 function f with its first two derivatives, used to subordinate a
// stationary Gaussian field. The symmetry declaration is verified, not
// trusted (see membership_in_M_C).
struct SubordinatorFunction {
  std::function<double(double)> eval;
  std::function<double(double)> deriv1;
  std::function<double(double)> deriv2;
  bool declared_symmetric = false;
};

inline SubordinatorFunction subordinator_identity() {
  return {[](double x) { return x; }, [](double) { return 1.0; },
          [](double) { return 0.0; }, false};
}

inline SubordinatorFunction subordinator_square() {
  return {[](double x) { return x * x; }, [](double x) { return 2.0 * x; },
          [](double) { return 2.0; }, true};
}

inline SubordinatorFunction subordinator_cube() {
  return {[](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; },
          [](double x) { return 6.0 * x; }, false};
}

inline SubordinatorFunction subordinator_by_name(const std::string& name) {
  if (name == "x") return subordinator_identity();
  if (name == "x2") return subordinator_square();
  if (name == "x3") return subordinator_cube();
  throw UsageError("unknown subordinator '" + name + "' (expected x, x2 or x3)");
}

// Probabilists' Hermite polynomial H_q via the three-term recurrence
// H_{q+1}(x) = x H_q(x) - q H_{q-1}(x).
inline double hermite_eval(std::size_t q, double x) {
  if (q == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (std::size_t k = 1; k < q; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// Truncated expansion f(x) = c_0 + sum_{q>=1} c_q H_q(x), c_q q! = E[f(Z)H_q(Z)].
struct HermiteExpansion {
  std::vector<double> c;     // c[0] = E[f(Z)]
  double variance_of_f = 0;  // sum_{q>=1} c_q^2 q!, truncated

  std::size_t order() const { return c.empty() ? 0 : c.size() - 1; }
};

// Computes c_0..c_q_max by Gauss-Hermite quadrature. Node pairs are
// accumulated together so parity is exact: even f gets exactly zero odd
// coefficients. Aborts when the last retained term still carries more than
// 1% of the expansion variance.
inline HermiteExpansion hermite_coefficients(const SubordinatorFunction& f,
                                             std::size_t q_max = 20,
                                             std::size_t n_nodes = 64) {
  if (q_max < 1) throw UsageError("hermite_coefficients: q_max must be >= 1");
  if (!f.eval) throw UsageError("hermite_coefficients: f.eval is empty");
  const QuadratureRule& rule = gauss_hermite_rule(n_nodes);
  const std::size_t n = rule.nodes.size();

  std::vector<double> fv(n);
  for (std::size_t i = 0; i < n; ++i) {
    fv[i] = f.eval(rule.nodes[i]);
    if (!std::isfinite(fv[i]))
      throw NumericalError("hermite_coefficients: f not finite at quadrature node");
  }

  // H_q at all nodes, advanced one order per pass.
  std::vector<double> h_prev(n, 1.0), h_cur(n), h_next(n);
  for (std::size_t i = 0; i < n; ++i) h_cur[i] = rule.nodes[i];

  HermiteExpansion exp;
  exp.c.assign(q_max + 1, 0.0);
  double factorial = 1.0;
  for (std::size_t q = 0; q <= q_max; ++q) {
    const std::vector<double>& hq = (q == 0) ? h_prev : h_cur;
    double sum = 0.0, comp = 0.0;
    auto add = [&](double term) {
      const double y = term - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    };
    for (std::size_t i = 0; i < n / 2; ++i) {
      const std::size_t j = n - 1 - i;
      add(rule.weights[i] * (fv[i] * hq[i] + fv[j] * hq[j]));
    }
    if (n % 2 == 1) {
      const std::size_t mid = n / 2;
      add(rule.weights[mid] * fv[mid] * hq[mid]);
    }
    if (q > 0) factorial *= static_cast<double>(q);
    exp.c[q] = sum / factorial;

    if (q >= 1 && q < q_max) {
      for (std::size_t i = 0; i < n; ++i)
        h_next[i] = rule.nodes[i] * h_cur[i] - static_cast<double>(q) * h_prev[i];
      std::swap(h_prev, h_cur);
      std::swap(h_cur, h_next);
    }
  }

  double variance = 0.0;
  double qfact = 1.0;
  for (std::size_t q = 1; q <= q_max; ++q) {
    qfact *= static_cast<double>(q);
    variance += exp.c[q] * exp.c[q] * qfact;
  }
  exp.variance_of_f = variance;

  const double tail = exp.c[q_max] * exp.c[q_max] * qfact;
  if (variance > 0 && tail > 0.01 * variance)
    throw TheoremError(
        "hermite_coefficients: truncation tail exceeds 1% of the expansion "
        "variance; raise q_max");
  return exp;
}

// Expansion of the standardized subordinator g(z) = f(sd * z), so the
// coefficients pair with the correlation function of a field of variance
// sd^2. Reduces to hermite_coefficients(f) when sd = 1.
inline HermiteExpansion standardized_expansion(const SubordinatorFunction& f,
                                               double field_sd, std::size_t q_max = 20,
                                               std::size_t n_nodes = 64) {
  if (!(field_sd > 0))
    throw DomainError("standardized_expansion: field sd must be > 0");
  SubordinatorFunction g;
  g.eval = [eval = f.eval, field_sd](double z) { return eval(field_sd * z); };
  g.deriv1 = [d1 = f.deriv1, field_sd](double z) { return field_sd * d1(field_sd * z); };
  g.deriv2 = [d2 = f.deriv2, field_sd](double z) {
    return field_sd * field_sd * d2(field_sd * z);
  };
  g.declared_symmetric = f.declared_symmetric;
  return hermite_coefficients(g, q_max, n_nodes);
}

// Cov[f(Z_1), f(Z_2)] for jointly standard Gaussian Z_1, Z_2 with
// correlation rho: sum_{q>=1} c_q^2 q! rho^q.
inline double subordinated_covariance(const HermiteExpansion& exp, double rho) {
  if (!(std::abs(rho) <= 1.0))
    throw DomainError("subordinated_covariance: |rho| must be <= 1");
  double sum = 0.0;
  double qfact = 1.0;
  double rho_pow = 1.0;
  for (std::size_t q = 1; q < exp.c.size(); ++q) {
    qfact *= static_cast<double>(q);
    rho_pow *= rho;
    sum += exp.c[q] * exp.c[q] * qfact * rho_pow;
  }
  return sum;
}

// Admissibility of f for the subordinated CLT: symmetric f when the
// covariance is integrable, nonzero first Hermite coefficient (c_1 =
// E[f(Z)Z]) otherwise. A symmetry declaration is spot-checked on 128
// golden-ratio points in [-5, 5].
inline bool membership_in_M_C(const SubordinatorFunction& f,
                              const HermiteExpansion& exp,
                              bool covariance_integrable) {
  if (covariance_integrable) {
    if (f.declared_symmetric) {
      constexpr double kGoldenFrac = 0.6180339887498949;
      for (int k = 1; k <= 128; ++k) {
        const double u = std::fmod(static_cast<double>(k) * kGoldenFrac, 1.0);
        const double x = -5.0 + 10.0 * u;
        const double lhs = f.eval(x);
        const double rhs = f.eval(-x);
        if (std::abs(lhs - rhs) > 1e-9 * (1.0 + std::abs(lhs)))
          throw DomainError(
              "membership_in_M_C: declared_symmetric contradicted at x=" +
              std::to_string(x));
      }
    }
    return f.declared_symmetric;
  }
  if (exp.c.size() < 2)
    throw UsageError("membership_in_M_C: expansion must include c_1");
  return std::abs(exp.c[1]) > 1e-10;
}

}  // namespace sml
