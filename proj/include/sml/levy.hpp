#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sml/distance.hpp"
#include "sml/errors.hpp"
#include "sml/io.hpp"
#include "sml/mc_engine.hpp"
#include "sml/numerics.hpp"
#include "sml/rng.hpp"

namespace sml {

struct LevyAtom {
  double position;  // != 0
  double weight;    // > 0
};

struct AtomsMeasure {
  std::vector<LevyAtom> atoms;
};

// Density |x|^{-(2+delta)} on [-a, b] \ {0}, delta in (-1, 1).
struct TruncatedPowerLaw {
  double delta;
  double a;
  double b;
};

// Density tabulated on a grid; piecewise linear between nodes.
struct TabulatedDensity {
  std::vector<double> xs;
  std::vector<double> density;
};

class LevyMeasure {
 public:
  using Kind = std::variant<AtomsMeasure, TruncatedPowerLaw, TabulatedDensity>;

  static LevyMeasure atoms(std::vector<LevyAtom> list) {
    if (list.empty()) throw UsageError("atoms measure: need at least one atom");
    for (const auto& a : list) {
      if (a.position == 0) throw DomainError("atoms measure: atom at 0 is not allowed");
      if (!(a.weight > 0)) throw DomainError("atoms measure: weights must be > 0");
    }
    return LevyMeasure(AtomsMeasure{std::move(list)});
  }

  static LevyMeasure truncated_power_law(double delta, double a, double b) {
    if (!(delta > -1.0) || !(delta < 1.0))
      throw DomainError("power-law measure: delta must lie in (-1,1)");
    if (!(a > 0) || !(b > 0))
      throw DomainError("power-law measure: a and b must be > 0");
    return LevyMeasure(TruncatedPowerLaw{delta, a, b});
  }

  static LevyMeasure tabulated(std::vector<double> xs, std::vector<double> density) {
    if (xs.size() != density.size() || xs.size() < 2)
      throw UsageError("tabulated density: need >= 2 matching (x, density) rows");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1]))
        throw UsageError("tabulated density: grid must be strictly increasing");
    for (double d : density)
      if (!(d >= 0)) throw DomainError("tabulated density: density must be >= 0");
    return LevyMeasure(TabulatedDensity{std::move(xs), std::move(density)});
  }

  static LevyMeasure tabulated_from_csv(const std::string& path) {
    TwoColumnCsv csv = read_two_column_csv(path);
    return tabulated(std::move(csv.first), std::move(csv.second));
  }

  const Kind& kind() const { return kind_; }

  bool finite_activity() const {
    return !std::holds_alternative<TruncatedPowerLaw>(kind_);
  }

 private:
  explicit LevyMeasure(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

enum class MomentRegion { kAll, kSmall, kBig };

namespace detail {

// |x| band [lo, hi) shared by all region computations.
struct Band {
  double lo;
  double hi;
};

inline Band region_band(MomentRegion region, double eps) {
  switch (region) {
    case MomentRegion::kAll:
      return {0.0, std::numeric_limits<double>::infinity()};
    case MomentRegion::kSmall:
      return {0.0, eps};
    case MomentRegion::kBig:
      return {eps, std::numeric_limits<double>::infinity()};
  }
  throw UsageError("unknown moment region");
}

// One-sided ∫_lo^hi x^(p-2-delta) dx with divergence detection at 0.
inline double power_law_piece(double p, double delta, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  const double e = p - 2.0 - delta;
  if (lo <= 0.0) {
    if (e + 1.0 <= 0.0)
      throw TheoremError("power-law measure: moment of order " + std::to_string(p) +
                         " diverges near 0");
    return std::pow(hi, e + 1.0) / (e + 1.0);
  }
  if (std::abs(e + 1.0) < 1e-12) return std::log(hi / lo);
  return (std::pow(hi, e + 1.0) - std::pow(lo, e + 1.0)) / (e + 1.0);
}

// ∫_band |x|^p dν with the band clipped against the measure support.
inline double band_abs_moment(const LevyMeasure& m, double p, Band band) {
  if (const auto* atoms = std::get_if<AtomsMeasure>(&m.kind())) {
    double sum = 0.0;
    for (const auto& a : atoms->atoms) {
      const double ax = std::abs(a.position);
      if (ax >= band.lo && ax < band.hi)
        sum += a.weight * (p == 0.0 ? 1.0 : std::pow(ax, p));
    }
    return sum;
  }
  if (const auto* pl = std::get_if<TruncatedPowerLaw>(&m.kind())) {
    double total = 0.0;
    for (double bound : {pl->b, pl->a}) {
      const double lo = std::min(band.lo, bound);
      const double hi = std::min(band.hi, bound);
      total += power_law_piece(p, pl->delta, lo, hi);
    }
    return total;
  }
  const auto& tab = std::get<TabulatedDensity>(m.kind());
  const QuadratureRule& rule = gauss_legendre_rule(8);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tab.xs.size(); ++i) {
    double x0 = tab.xs[i], x1 = tab.xs[i + 1];
    const double d0 = tab.density[i], d1 = tab.density[i + 1];
    const double slope = (d1 - d0) / (x1 - x0);
    auto dens = [&](double x) { return d0 + slope * (x - tab.xs[i]); };
    // clip the cell against { band.lo <= |x| < band.hi }
    for (int side = 0; side < 2; ++side) {
      double lo = side == 0 ? std::max(x0, band.lo) : std::max(x0, -band.hi);
      double hi = side == 0 ? std::min(x1, band.hi) : std::min(x1, -band.lo);
      if (side == 0) lo = std::max(lo, 0.0);
      if (side == 1) hi = std::min(hi, 0.0);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      double cell = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = mid + half * rule.nodes[q];
        cell += rule.weights[q] * std::pow(std::abs(x), p) * dens(x);
      }
      total += cell * half;
    }
  }
  return total;
}

// Signed ∫_band x dν (compensator ingredient).
inline double band_signed_mean(const LevyMeasure& m, Band band) {
  if (const auto* atoms = std::get_if<AtomsMeasure>(&m.kind())) {
    double sum = 0.0;
    for (const auto& a : atoms->atoms) {
      const double ax = std::abs(a.position);
      if (ax >= band.lo && ax < band.hi) sum += a.weight * a.position;
    }
    return sum;
  }
  if (const auto* pl = std::get_if<TruncatedPowerLaw>(&m.kind())) {
    const double pos = power_law_piece(1.0, pl->delta, std::min(band.lo, pl->b),
                                       std::min(band.hi, pl->b));
    const double neg = power_law_piece(1.0, pl->delta, std::min(band.lo, pl->a),
                                       std::min(band.hi, pl->a));
    return pos - neg;
  }
  const auto& tab = std::get<TabulatedDensity>(m.kind());
  const QuadratureRule& rule = gauss_legendre_rule(8);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tab.xs.size(); ++i) {
    const double d0 = tab.density[i], d1 = tab.density[i + 1];
    const double slope = (d1 - d0) / (tab.xs[i + 1] - tab.xs[i]);
    auto dens = [&](double x) { return d0 + slope * (x - tab.xs[i]); };
    for (int side = 0; side < 2; ++side) {
      double lo = side == 0 ? std::max(tab.xs[i], band.lo)
                            : std::max(tab.xs[i], -band.hi);
      double hi = side == 0 ? std::min(tab.xs[i + 1], band.hi)
                            : std::min(tab.xs[i + 1], -band.lo);
      if (side == 0) lo = std::max(lo, 0.0);
      if (side == 1) hi = std::min(hi, 0.0);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      double cell = 0.0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = mid + half * rule.nodes[q];
        cell += rule.weights[q] * x * dens(x);
      }
      total += cell * half;
    }
  }
  return total;
}

inline double band_mass(const LevyMeasure& m, Band band) {
  return band_abs_moment(m, 0.0, band);
}

// ∫_band |x h(s,x)|^k dν for fixed s; kernel may depend on the jump size.
// The power-law side integral is flattened by x = edge * u^{1/(k-1-delta)}
// so the Gauss-Legendre rule sees a smooth integrand.
inline double band_kernel_moment(const LevyMeasure& m,
                                 const std::function<double(double, double)>& h,
                                 double s, double k, Band band) {
  if (const auto* atoms = std::get_if<AtomsMeasure>(&m.kind())) {
    double sum = 0.0;
    for (const auto& a : atoms->atoms) {
      const double ax = std::abs(a.position);
      if (ax >= band.lo && ax < band.hi)
        sum += a.weight * std::pow(std::abs(a.position * h(s, a.position)), k);
    }
    return sum;
  }
  const QuadratureRule& rule = gauss_legendre_rule(64);
  if (const auto* pl = std::get_if<TruncatedPowerLaw>(&m.kind())) {
    double total = 0.0;
    for (int side = 0; side < 2; ++side) {
      const double bound = side == 0 ? pl->b : pl->a;
      const double sign = side == 0 ? 1.0 : -1.0;
      const double lo = std::min(band.lo, bound);
      const double hi = std::min(band.hi, bound);
      if (!(hi > lo)) continue;
      const double expo = k - 1.0 - pl->delta;  // > 0 for k >= 2, delta < 1
      if (lo == 0.0) {
        const double scale = std::pow(hi, expo) / expo;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double u = 0.5 + 0.5 * rule.nodes[q];
          const double x = hi * std::pow(u, 1.0 / expo);
          total += 0.5 * rule.weights[q] * scale * std::pow(std::abs(h(s, sign * x)), k);
        }
      } else {
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[q];
          total += 0.5 * (hi - lo) * rule.weights[q] *
                   std::pow(std::abs(h(s, sign * x)), k) * std::pow(x, k - 2.0 - pl->delta);
        }
      }
    }
    return total;
  }
  const auto& tab = std::get<TabulatedDensity>(m.kind());
  const QuadratureRule& cell_rule = gauss_legendre_rule(8);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tab.xs.size(); ++i) {
    const double d0 = tab.density[i], d1 = tab.density[i + 1];
    const double slope = (d1 - d0) / (tab.xs[i + 1] - tab.xs[i]);
    auto dens = [&](double x) { return d0 + slope * (x - tab.xs[i]); };
    for (int side = 0; side < 2; ++side) {
      double lo = side == 0 ? std::max(tab.xs[i], band.lo)
                            : std::max(tab.xs[i], -band.hi);
      double hi = side == 0 ? std::min(tab.xs[i + 1], band.hi)
                            : std::min(tab.xs[i + 1], -band.lo);
      if (side == 0) lo = std::max(lo, 0.0);
      if (side == 1) hi = std::min(hi, 0.0);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      double cell = 0.0;
      for (std::size_t q = 0; q < cell_rule.nodes.size(); ++q) {
        const double x = mid + half * cell_rule.nodes[q];
        cell += cell_rule.weights[q] * std::pow(std::abs(x * h(s, x)), k) * dens(x);
      }
      total += cell * half;
    }
  }
  return total;
}

// Signed ∫_band h(s,x) x dν for fixed s. Callers pass bands bounded away
// from 0, where the power-law integrand is smooth.
inline double band_kernel_signed_mean(const LevyMeasure& m,
                                      const std::function<double(double, double)>& h,
                                      double s, Band band) {
  if (const auto* atoms = std::get_if<AtomsMeasure>(&m.kind())) {
    double sum = 0.0;
    for (const auto& a : atoms->atoms) {
      const double ax = std::abs(a.position);
      if (ax >= band.lo && ax < band.hi)
        sum += a.weight * h(s, a.position) * a.position;
    }
    return sum;
  }
  const QuadratureRule& rule = gauss_legendre_rule(64);
  if (const auto* pl = std::get_if<TruncatedPowerLaw>(&m.kind())) {
    double total = 0.0;
    for (int side = 0; side < 2; ++side) {
      const double bound = side == 0 ? pl->b : pl->a;
      const double sign = side == 0 ? 1.0 : -1.0;
      const double lo = std::min(band.lo, bound);
      const double hi = std::min(band.hi, bound);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        const double x = mid + half * rule.nodes[q];
        total += half * rule.weights[q] * h(s, sign * x) * sign * x *
                 std::pow(x, -2.0 - pl->delta);
      }
    }
    return total;
  }
  const auto& tab = std::get<TabulatedDensity>(m.kind());
  const QuadratureRule& cell_rule = gauss_legendre_rule(8);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tab.xs.size(); ++i) {
    const double d0 = tab.density[i], d1 = tab.density[i + 1];
    const double slope = (d1 - d0) / (tab.xs[i + 1] - tab.xs[i]);
    auto dens = [&](double x) { return d0 + slope * (x - tab.xs[i]); };
    for (int side = 0; side < 2; ++side) {
      double lo = side == 0 ? std::max(tab.xs[i], band.lo)
                            : std::max(tab.xs[i], -band.hi);
      double hi = side == 0 ? std::min(tab.xs[i + 1], band.hi)
                            : std::min(tab.xs[i + 1], -band.lo);
      if (side == 0) lo = std::max(lo, 0.0);
      if (side == 1) hi = std::min(hi, 0.0);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      double cell = 0.0;
      for (std::size_t q = 0; q < cell_rule.nodes.size(); ++q) {
        const double x = mid + half * cell_rule.nodes[q];
        cell += cell_rule.weights[q] * h(s, x) * x * dens(x);
      }
      total += cell * half;
    }
  }
  return total;
}

}  // namespace detail

// ∫_region |x|^p dν. Closed form for the power law, sums for atoms,
// piecewise quadrature for tabulated densities.
inline double measure_moment(const LevyMeasure& measure, double p,
                             MomentRegion region, double eps = 0.0) {
  if (!(p > 0)) throw UsageError("measure_moment: p must be > 0");
  if (region != MomentRegion::kAll && !(eps >= 0))
    throw UsageError("measure_moment: eps must be >= 0");
  return detail::band_abs_moment(measure, p, detail::region_band(region, eps));
}

// ν(region); infinite-activity measures diverge for the small region.
inline double region_mass(const LevyMeasure& measure, MomentRegion region,
                          double eps = 0.0) {
  return detail::band_abs_moment(measure, 0.0, detail::region_band(region, eps));
}

// σ̂(eps)/eps: a divergent limit as eps -> 0 is the classical sufficient
// condition for Brownian replacement of small jumps. Reported as a
// diagnostic only; no decision is drawn from it.
inline std::optional<double> sigma_over_eps_diagnostic(const LevyMeasure& measure,
                                                       double eps) {
  if (!(eps > 0)) throw DomainError("sigma_over_eps_diagnostic: eps must be > 0");
  const double s2 = measure_moment(measure, 2.0, MomentRegion::kSmall, eps);
  if (!(s2 > 0)) return std::nullopt;
  return std::sqrt(s2) / eps;
}

// ∫_{|x|<eps}|x|^3 dν / σ̂(eps)^3; empty small region yields no value.
inline std::optional<double> third_moment_ratio(const LevyMeasure& measure,
                                                double eps) {
  const double s2 = measure_moment(measure, 2.0, MomentRegion::kSmall, eps);
  if (!(s2 > 0)) return std::nullopt;
  const double m3 = measure_moment(measure, 3.0, MomentRegion::kSmall, eps);
  return m3 / std::pow(s2, 1.5);
}

// ∫∫_{[0,t]x{|x|<eps}} |x h(s,x)|^3 dν ds / σ̃_t(eps)^3 by tensor-product
// quadrature (time Gauss-Legendre x measure integration).
inline std::optional<double> weighted_small_jump_condition(
    const LevyMeasure& measure, const std::function<double(double, double)>& h,
    double t, double eps) {
  if (!(t > 0)) throw DomainError("weighted_small_jump_condition: t must be > 0");
  const detail::Band band = detail::region_band(MomentRegion::kSmall, eps);
  auto time_integral = [&](double k) {
    return integrate_gauss_legendre(
        [&](double s) { return detail::band_kernel_moment(measure, h, s, k, band); },
        0.0, t, 128);
  };
  const double var = time_integral(2.0);
  if (!(var > 0)) return std::nullopt;
  return time_integral(3.0) / std::pow(var, 1.5);
}

// Poisson count by chunked product-of-uniforms: exact, deterministic stream
// consumption for any mean.
inline std::uint64_t sample_poisson(RngStream& stream, double mean) {
  if (!(mean >= 0)) throw DomainError("sample_poisson: mean must be >= 0");
  std::uint64_t total = 0;
  double remaining = mean;
  while (remaining > 0) {
    const double mu = std::min(remaining, 32.0);
    remaining -= mu;
    const double floor_p = std::exp(-mu);
    double p = 1.0;
    std::uint64_t k = 0;
    for (;;) {
      p *= stream.next_uniform();
      if (p <= floor_p) break;
      ++k;
    }
    total += k;
  }
  return total;
}

struct JumpPath {
  std::vector<double> times;  // increasing in [0, horizon]
  std::vector<double> sizes;  // |size| >= epsilon
  double epsilon = 0;
  double horizon = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Draws one jump size from ν restricted to the band; v is uniform in (0,1)
// after the side has been chosen, consuming exactly two uniforms per jump.
class BandSizeSampler {
 public:
  BandSizeSampler(const LevyMeasure& measure, Band band) : measure_(&measure), band_(band) {
    if (const auto* tab = std::get_if<TabulatedDensity>(&measure.kind())) {
      // restricted piecewise-linear cells with cumulative masses
      for (std::size_t i = 0; i + 1 < tab->xs.size(); ++i) {
        const double d0 = tab->density[i], d1 = tab->density[i + 1];
        const double slope = (d1 - d0) / (tab->xs[i + 1] - tab->xs[i]);
        for (int side = 0; side < 2; ++side) {
          double lo = side == 0 ? std::max(tab->xs[i], band.lo)
                                : std::max(tab->xs[i], -band.hi);
          double hi = side == 0 ? std::min(tab->xs[i + 1], band.hi)
                                : std::min(tab->xs[i + 1], -band.lo);
          if (side == 0) lo = std::max(lo, 0.0);
          if (side == 1) hi = std::min(hi, 0.0);
          if (!(hi > lo)) continue;
          Cell c;
          c.x0 = lo;
          c.d0 = d0 + slope * (lo - tab->xs[i]);
          c.slope = slope;
          c.mass = 0.5 * (c.d0 + d0 + slope * (hi - tab->xs[i])) * (hi - lo);
          c.x1 = hi;
          if (c.mass > 0) cells_.push_back(c);
        }
      }
      std::sort(cells_.begin(), cells_.end(),
                [](const Cell& a, const Cell& b) { return a.x0 < b.x0; });
      for (auto& c : cells_) {
        cum_.push_back((cum_.empty() ? 0.0 : cum_.back()) + c.mass);
      }
      mass_ = cum_.empty() ? 0.0 : cum_.back();
      return;
    }
    if (const auto* atoms = std::get_if<AtomsMeasure>(&measure.kind())) {
      for (const auto& a : atoms->atoms) {
        const double ax = std::abs(a.position);
        if (ax >= band.lo && ax < band.hi) {
          atom_positions_.push_back(a.position);
          cum_.push_back((cum_.empty() ? 0.0 : cum_.back()) + a.weight);
        }
      }
      mass_ = cum_.empty() ? 0.0 : cum_.back();
      return;
    }
    const auto& pl = std::get<TruncatedPowerLaw>(measure.kind());
    pos_lo_ = std::min(band.lo, pl.b);
    pos_hi_ = std::min(band.hi, pl.b);
    neg_lo_ = std::min(band.lo, pl.a);
    neg_hi_ = std::min(band.hi, pl.a);
    pos_mass_ = power_law_piece(0.0, pl.delta, pos_lo_, pos_hi_);
    neg_mass_ = power_law_piece(0.0, pl.delta, neg_lo_, neg_hi_);
    mass_ = pos_mass_ + neg_mass_;
  }

  double mass() const { return mass_; }

  double draw(RngStream& stream) const {
    const double u_side = stream.next_uniform();
    const double v = stream.next_uniform();
    if (const auto* pl = std::get_if<TruncatedPowerLaw>(&measure_->kind())) {
      const bool positive = u_side * mass_ < pos_mass_;
      const double lo = positive ? pos_lo_ : neg_lo_;
      const double hi = positive ? pos_hi_ : neg_hi_;
      const double q = 1.0 + pl->delta;  // > 0
      const double lo_pow = std::pow(lo, -q);
      const double hi_pow = std::pow(hi, -q);
      const double x = std::pow(lo_pow - v * (lo_pow - hi_pow), -1.0 / q);
      return positive ? x : -x;
    }
    // categorical pick by cumulative mass, shared by atoms and cells
    const double target = u_side * mass_;
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cum_.begin(), cum_.end(), target) - cum_.begin());
    const std::size_t j = std::min(idx, cum_.size() - 1);
    if (!atom_positions_.empty()) return atom_positions_[j];
    const Cell& c = cells_[j];
    const double within = v * c.mass;
    double xi;
    if (std::abs(c.slope) < 1e-300) {
      xi = within / c.d0;
    } else {
      const double disc = c.d0 * c.d0 + 2.0 * c.slope * within;
      xi = (std::sqrt(std::max(disc, 0.0)) - c.d0) / c.slope;
    }
    return std::min(c.x0 + xi, c.x1);
  }

 private:
  struct Cell {
    double x0 = 0, x1 = 0, d0 = 0, slope = 0, mass = 0;
  };

  const LevyMeasure* measure_;
  Band band_;
  std::vector<Cell> cells_;
  std::vector<double> atom_positions_;
  std::vector<double> cum_;
  double mass_ = 0;
  double pos_lo_ = 0, pos_hi_ = 0, neg_lo_ = 0, neg_hi_ = 0;
  double pos_mass_ = 0, neg_mass_ = 0;
};

inline void sample_band_jumps(const BandSizeSampler& sampler, double horizon,
                              RngStream& stream, std::vector<double>& times,
                              std::vector<double>& sizes) {
  const double mass = sampler.mass();
  if (!(mass > 0)) return;
  const std::uint64_t count = sample_poisson(stream, horizon * mass);
  for (std::uint64_t j = 0; j < count; ++j) {
    times.push_back(horizon * stream.next_uniform());
    sizes.push_back(sampler.draw(stream));
  }
}

}  // namespace detail

// Compound-Poisson path of the jumps with |x| >= eps: Poisson(T ν_big)
// count, uniform times, i.i.d. sizes from the normalized restriction.
inline JumpPath sample_big_jumps(const LevyMeasure& measure, double eps,
                                 double horizon, RngStream& stream) {
  if (!(horizon > 0)) throw DomainError("sample_big_jumps: horizon must be > 0");
  JumpPath path;
  path.epsilon = eps;
  path.horizon = horizon;
  detail::BandSizeSampler sampler(measure,
                                  detail::region_band(MomentRegion::kBig, eps));
  detail::sample_band_jumps(sampler, horizon, stream, path.times, path.sizes);

  std::vector<std::size_t> order(path.times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (path.times[a] != path.times[b]) return path.times[a] < path.times[b];
    return a < b;
  });
  JumpPath sorted = path;
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.times[i] = path.times[order[i]];
    sorted.sizes[i] = path.sizes[order[i]];
  }
  return sorted;
}

inline JumpPath sample_big_jumps(const LevyMeasure& measure, double eps,
                                 double horizon, std::uint64_t seed) {
  RngStream stream = derive_stream(seed, 0, stream_tag::kBigJumps);
  JumpPath path = sample_big_jumps(measure, eps, horizon, stream);
  path.seed = seed;
  return path;
}

struct SmallJumpPoint {
  double epsilon = 0;
  DistanceEstimate dw;
};

// Standardized small-jump functional I_1(h 1_{[0,t] x {|x|<eps}}) / σ̃_t(eps),
// sampled by layered truncation: geometric slices of compound-Poisson jumps
// down to eps/floor_divisor, a centered Gaussian of matching variance below
// the floor, each slice compensated by its own drift. Reports the empirical
// W1 distance to N(0,1) per epsilon.
inline std::vector<SmallJumpPoint> small_jump_clt_experiment(
    const LevyMeasure& measure, const std::function<double(double, double)>& h,
    double t, const std::vector<double>& eps_list, std::size_t n,
    std::uint64_t seed, unsigned floor_divisor = 64, unsigned workers = 1) {
  if (!(t > 0)) throw DomainError("small_jump_clt_experiment: t must be > 0");
  if (n < 2) throw UsageError("small_jump_clt_experiment: need n >= 2");
  if (eps_list.empty()) throw UsageError("small_jump_clt_experiment: empty eps list");
  if (floor_divisor < 2)
    throw UsageError("small_jump_clt_experiment: floor_divisor must be >= 2");

  std::vector<SmallJumpPoint> results;
  results.reserve(eps_list.size());
  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    const double eps = eps_list[ei];
    if (!(eps > 0)) throw DomainError("small_jump_clt_experiment: eps must be > 0");

    auto small_var = [&](double cut) {
      return integrate_gauss_legendre(
          [&](double s) {
            return detail::band_kernel_moment(
                measure, h, s, 2.0, detail::region_band(MomentRegion::kSmall, cut));
          },
          0.0, t, 64);
    };
    const double sigma_tilde_sq = small_var(eps);
    if (!(sigma_tilde_sq > 0))
      throw TheoremError("small_jump_clt_experiment: no small jumps below eps=" +
                         std::to_string(eps));

    unsigned n_slices = 0;
    while ((1u << n_slices) < floor_divisor) ++n_slices;
    const double floor_eps = eps / static_cast<double>(1u << n_slices);

    struct Slice {
      detail::BandSizeSampler sampler;
      double compensator;
    };
    std::vector<Slice> slices;
    slices.reserve(n_slices);
    for (unsigned k = 0; k < n_slices; ++k) {
      const detail::Band band{eps / static_cast<double>(1u << (k + 1)),
                              eps / static_cast<double>(1u << k)};
      detail::BandSizeSampler sampler(measure, band);
      const double comp = integrate_gauss_legendre(
          [&](double s) { return detail::band_kernel_signed_mean(measure, h, s, band); },
          0.0, t, 64);
      slices.push_back(Slice{std::move(sampler), comp});
    }
    const double gauss_var = small_var(floor_eps);

    std::vector<double> samples(n);
    parallel_for(n, workers, 64, [&](std::size_t r) {
      RngStream stream_j =
          derive_stream(seed, r, stream_tag::kSmallJumpSlices | (ei << 8));
      RngStream stream_g =
          derive_stream(seed, r, stream_tag::kSmallJumpGauss | (ei << 8));
      double value = 0.0;
      std::vector<double> times, sizes;
      for (const Slice& slice : slices) {
        times.clear();
        sizes.clear();
        detail::sample_band_jumps(slice.sampler, t, stream_j, times, sizes);
        for (std::size_t j = 0; j < times.size(); ++j)
          value += h(times[j], sizes[j]) * sizes[j];
        value -= slice.compensator;
      }
      value += std::sqrt(gauss_var) * stream_g.next_normal();
      samples[r] = value / std::sqrt(sigma_tilde_sq);
    });

    SmallJumpPoint point;
    point.epsilon = eps;
    point.dw = empirical_w1_to_normal(samples, 0.0, 1.0,
                                      mix64(seed ^ (0xD157ull + ei)));
    results.push_back(point);
  }
  return results;
}

}  // namespace sml
