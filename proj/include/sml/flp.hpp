#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "sml/errors.hpp"
#include "sml/gaussian_processes.hpp"
#include "sml/io.hpp"
#include "sml/levy.hpp"
#include "sml/mc_engine.hpp"
#include "sml/numerics.hpp"
#include "sml/rng.hpp"

namespace sml {

// Discrete kernel on a grid from 0: the lower-triangular Cholesky factor of
// the fBM covariance matrix, so K K^T reproduces the covariance (the
// defining inner-product property) by construction. Entries absorb a
// sqrt(step) weight: K[i][j] ~ kernel value at (t_i, s_j) * sqrt(h).
struct GridKernel {
  Grid grid;
  double hurst = 0;
  Eigen::MatrixXd factor;  // lower triangular, row 0 is zero when t_0 = 0
};

inline GridKernel build_grid_kernel(double hurst, const Grid& grid) {
  if (!(hurst > 0.0) || !(hurst < 1.0))
    throw DomainError("build_grid_kernel: H must lie in (0,1)");
  if (grid.t_start != 0.0)
    throw UsageError("build_grid_kernel: grid must start at 0");

  const std::size_t n = grid.n_points;
  const std::size_t m = n - 1;  // strictly positive times
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          fbm_covariance(hurst, grid.point(i + 1), grid.point(j + 1));

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    const double scale = cov.diagonal().maxCoeff();
    cov.diagonal().array() += 1e-12 * scale;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError(
          "build_grid_kernel: covariance matrix numerically indefinite after "
          "jitter");
  }

  GridKernel kernel{grid, hurst,
                    Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(n))};
  kernel.factor.bottomRightCorner(static_cast<Eigen::Index>(m),
                                  static_cast<Eigen::Index>(m)) = llt.matrixL();
  return kernel;
}

// max |K K^T - fbm_covariance| over the grid.
inline double kernel_covariance_error(const GridKernel& kernel) {
  const std::size_t n = kernel.grid.n_points;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double rebuilt =
          kernel.factor.row(static_cast<Eigen::Index>(i))
              .head(static_cast<Eigen::Index>(j + 1))
              .dot(kernel.factor.row(static_cast<Eigen::Index>(j))
                       .head(static_cast<Eigen::Index>(j + 1)));
      const double target =
          fbm_covariance(kernel.hurst, kernel.grid.point(i), kernel.grid.point(j));
      worst = std::max(worst, std::abs(rebuilt - target));
    }
  }
  return worst;
}

inline double kernel_covariance_error(double hurst, const Grid& grid) {
  return kernel_covariance_error(build_grid_kernel(hurst, grid));
}

struct FlpEnsemble {
  Grid grid;
  double hurst = 0;
  double epsilon = 0;
  std::uint64_t seed = 0;
  double small_jump_ratio = 0;  // third-moment ratio at epsilon (0 if none)
  Eigen::MatrixXd paths;
  Eigen::MatrixXd jump_component;   // populated when requested
  Eigen::MatrixXd gauss_component;  // populated when requested
};

// Fractional Levy path approximation: jumps above epsilon mapped through
// the grid kernel (rows interpolated linearly to jump times, compensated by
// the mean of the restricted measure), plus an independent fBM scaled by
// sigma_hat(epsilon).
inline FlpEnsemble simulate_flp_approx(double hurst, const LevyMeasure& measure,
                                       double epsilon, const Grid& grid,
                                       std::size_t n, std::uint64_t seed,
                                       bool store_components = false,
                                       unsigned workers = 1) {
  if (n == 0) throw UsageError("simulate_flp_approx: need n >= 1");
  if (!(epsilon > 0)) throw DomainError("simulate_flp_approx: epsilon must be > 0");

  const GridKernel kernel = build_grid_kernel(hurst, grid);
  const std::size_t n_points = grid.n_points;
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);

  const double sigma_hat =
      std::sqrt(measure_moment(measure, 2.0, MomentRegion::kSmall, epsilon));
  const double mean_big =
      detail::band_signed_mean(measure, detail::region_band(MomentRegion::kBig, epsilon));

  // row integrals of the kernel (for the compensator): ∫ K_t(s) ds ≈ Σ_j K_ij √h
  std::vector<double> row_integral(n_points, 0.0);
  for (std::size_t i = 0; i < n_points; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j)
      s += kernel.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    row_integral[i] = s * sqrt_h;
  }

  // kernel value at (row i, time s): interpolate the weight-absorbed row
  auto kernel_value = [&](std::size_t i, double s) {
    const double pos = s / h;
    const std::size_t j0 = std::min(static_cast<std::size_t>(pos), n_points - 1);
    const double frac = pos - static_cast<double>(j0);
    const double left =
        kernel.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j0));
    const double right =
        j0 + 1 < n_points
            ? kernel.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j0 + 1))
            : 0.0;
    return (left * (1.0 - frac) + right * frac) / sqrt_h;
  };

  FlpEnsemble ensemble{grid, hurst, epsilon, seed, 0.0,
                       Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(n_points)),
                       Eigen::MatrixXd(), Eigen::MatrixXd()};
  if (auto ratio = third_moment_ratio(measure, epsilon))
    ensemble.small_jump_ratio = *ratio;
  if (store_components) {
    ensemble.jump_component.resize(static_cast<Eigen::Index>(n),
                                   static_cast<Eigen::Index>(n_points));
    ensemble.gauss_component.resize(static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(n_points));
  }

  parallel_for(n, workers, 8, [&](std::size_t r) {
    RngStream stream_jumps = derive_stream(seed, r, stream_tag::kFlpJumps);
    RngStream stream_gauss = derive_stream(seed, r, stream_tag::kFlpGauss);

    const JumpPath jumps =
        sample_big_jumps(measure, epsilon, grid.t_end, stream_jumps);

    Eigen::VectorXd normals(static_cast<Eigen::Index>(n_points));
    for (std::size_t i = 0; i < n_points; ++i)
      normals(static_cast<Eigen::Index>(i)) = stream_gauss.next_normal();
    const Eigen::VectorXd fbm =
        kernel.factor.triangularView<Eigen::Lower>() * normals;

    for (std::size_t i = 0; i < n_points; ++i) {
      double jump_value = 0.0;
      for (std::size_t j = 0; j < jumps.times.size(); ++j)
        jump_value += kernel_value(i, jumps.times[j]) * jumps.sizes[j];
      jump_value -= mean_big * row_integral[i];
      const double gauss_value = sigma_hat * fbm(static_cast<Eigen::Index>(i));
      ensemble.paths(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
          jump_value + gauss_value;
      if (store_components) {
        ensemble.jump_component(static_cast<Eigen::Index>(r),
                                static_cast<Eigen::Index>(i)) = jump_value;
        ensemble.gauss_component(static_cast<Eigen::Index>(r),
                                 static_cast<Eigen::Index>(i)) = gauss_value;
      }
    }
  });
  return ensemble;
}

// CSV rows (replicate, t, value).
inline void write_flp_csv(const FlpEnsemble& ensemble, const std::string& path) {
  CsvWriter csv({"replicate", "t", "value"});
  for (Eigen::Index r = 0; r < ensemble.paths.rows(); ++r)
    for (Eigen::Index j = 0; j < ensemble.paths.cols(); ++j)
      csv.push_row({std::to_string(r),
                    format_g17(ensemble.grid.point(static_cast<std::size_t>(j))),
                    format_g17(ensemble.paths(r, j))});
  csv.write(path);
}

// Compact block: magic "FLP1"; little-endian 64-bit header fields n,
// n_points, H (double), seed; then row-major 64-bit doubles.
inline void write_flp_binary(const FlpEnsemble& ensemble, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "binary path ensembles are little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open " + path + " for writing");
  out.write("FLP1", 4);
  const std::uint64_t n = static_cast<std::uint64_t>(ensemble.paths.rows());
  const std::uint64_t n_points = static_cast<std::uint64_t>(ensemble.paths.cols());
  const double hurst = ensemble.hurst;
  const std::uint64_t seed = ensemble.seed;
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&n_points), 8);
  out.write(reinterpret_cast<const char*>(&hurst), 8);
  out.write(reinterpret_cast<const char*>(&seed), 8);
  for (Eigen::Index r = 0; r < ensemble.paths.rows(); ++r)
    for (Eigen::Index j = 0; j < ensemble.paths.cols(); ++j) {
      const double v = ensemble.paths(r, j);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

}  // namespace sml
