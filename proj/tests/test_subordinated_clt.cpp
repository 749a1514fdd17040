#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "sml/subordinated_clt.hpp"

using namespace sml;

TEST_CASE("condition-star fit on fGn tails", "[subclt]") {
  const auto rough = fit_condition_star(StationaryCovariance::fgn_increment(0.75), 1e4);
  CHECK_FALSE(rough.integrable);
  CHECK(rough.regime == DecayRegime::kTvPrimeTo0);
  CHECK(std::abs(rough.alpha - 0.5) < 0.05);
  CHECK(std::abs(rough.M - 0.375) < 0.1 * 0.375);

  const auto smooth = fit_condition_star(StationaryCovariance::fgn_increment(0.25), 1e4);
  CHECK(smooth.integrable);
  CHECK(std::abs(smooth.alpha - 1.5) < 0.05);
  CHECK(smooth.M < 0.0);  // negative tail for H < 1/2

  CHECK_THROWS_AS(fit_condition_star(StationaryCovariance::fgn_increment(0.5), 1e4),
                  TheoremError);
  CHECK_THROWS_AS(fit_condition_star(StationaryCovariance::fgn_increment(0.75), 4.0),
                  UsageError);
}

TEST_CASE("condition-star fit on the frac-OU covariance", "[subclt]") {
  const auto decay =
      fit_condition_star(StationaryCovariance::frac_ou(0.75, 2.0, 1.0), 200.0);
  CHECK_FALSE(decay.integrable);
  CHECK(std::abs(decay.alpha - 0.5) < 0.05);
  CHECK(std::abs(decay.M - 0.09375) < 0.1 * 0.09375);
}

TEST_CASE("condition-star rejects a sign-flipping tail", "[subclt]") {
  std::vector<double> lags, values;
  for (int i = 0; i <= 40; ++i) {
    lags.push_back(i);
    values.push_back(i == 0 ? 1.0 : 0.5 * std::cos(1.7 * i) / (1.0 + 0.2 * i));
  }
  const auto model = StationaryCovariance::tabulated(lags, values);
  CHECK_THROWS_AS(fit_condition_star(model, 40.0), TheoremError);
}

TEST_CASE("v_tilde closed forms", "[subclt]") {
  DecayModel integrable;
  integrable.integrable = true;
  CHECK(v_tilde(integrable, 50.0) == 50.0);

  DecayModel decay;
  decay.integrable = false;
  decay.alpha = 0.5;
  decay.K = 1.0;
  decay.M = 0.375;
  decay.regime = DecayRegime::kTvPrimeTo0;
  CHECK(v_tilde(decay, 100.0) == Catch::Approx(1000.0 / 0.75).epsilon(1e-12));

  DecayModel nearly_flat = decay;
  nearly_flat.alpha = 1e-6;
  CHECK(v_tilde(nearly_flat, 10.0) == Catch::Approx(50.0).epsilon(1e-4));

  DecayModel broken = decay;
  broken.alpha = 1.4;
  CHECK_THROWS_AS(v_tilde(broken, 10.0), UsageError);
  CHECK_THROWS_AS(v_tilde(decay, 0.0), DomainError);
}

TEST_CASE("v_tilde equals the numeric double integral of V", "[subclt]") {
  RngStream stream = derive_stream(606, 0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const double k_scale = 0.5 + 1.5 * stream.next_uniform();
    const double alpha = 0.05 + 0.9 * stream.next_uniform();
    const double horizon = 10.0 + 990.0 * stream.next_uniform();

    // flattening substitutions x = y u^p (inner) and y = T v^q (outer) give
    // C^2 transformed integrands; composite Simpson on both
    auto simpson01 = [](const std::function<double(double)>& f, std::size_t m) {
      const double h = 1.0 / static_cast<double>(m);
      double acc = f(0.0) + f(1.0);
      for (std::size_t i = 1; i < m; ++i)
        acc += f(static_cast<double>(i) * h) * (i % 2 == 1 ? 4.0 : 2.0);
      return acc * h / 3.0;
    };
    const double p = std::ceil(4.0 / (1.0 - alpha)) + 1.0;
    // int_0^y x^-alpha dx = y^{1-alpha} * inner_unit
    const double inner_unit = simpson01(
        [&](double u) { return p * std::pow(u, p * (1.0 - alpha) - 1.0); }, 1 << 12);
    const double q = std::ceil(4.0 / (2.0 - alpha)) + 1.0;
    // int_0^T K y^{1-alpha} inner_unit dy
    const double outer =
        k_scale * inner_unit * std::pow(horizon, 2.0 - alpha) *
        simpson01([&](double v) { return q * std::pow(v, q * (2.0 - alpha) - 1.0); },
                  1 << 12);

    DecayModel decay;
    decay.integrable = false;
    decay.alpha = alpha;
    decay.K = k_scale;
    decay.M = 1.0;
    decay.regime = DecayRegime::kTvPrimeTo0;
    CHECK(v_tilde(decay, horizon) == Catch::Approx(outer).epsilon(1e-6));
  }
}

TEST_CASE("limiting variance closed form and gates", "[subclt]") {
  const auto model = StationaryCovariance::fgn_increment(0.75);
  DecayModel decay;
  decay.integrable = false;
  decay.alpha = 0.5;
  decay.K = 1.0;
  decay.M = 0.375;
  decay.regime = DecayRegime::kTvPrimeTo0;

  const auto lin = hermite_coefficients(subordinator_identity());
  CHECK(limiting_variance(model, decay, lin) == Catch::Approx(0.75).epsilon(1e-12));

  const auto sq = hermite_coefficients(subordinator_square());
  CHECK_THROWS_AS(limiting_variance(model, decay, sq), TheoremError);

  SubordinatorFunction scaled;
  scaled.eval = [](double x) { return 3.0 * x; };
  scaled.deriv1 = [](double) { return 3.0; };
  scaled.deriv2 = [](double) { return 0.0; };
  const auto scaled_exp = hermite_coefficients(scaled);
  CHECK(limiting_variance(model, decay, scaled_exp) ==
        Catch::Approx(9.0 * 0.75).epsilon(1e-11));
}

TEST_CASE("predicted rate closed forms and monotonicity", "[subclt]") {
  DecayModel integrable;
  integrable.integrable = true;
  CHECK(predicted_rate(integrable, 16.0) == Catch::Approx(0.5).epsilon(1e-14));
  CHECK(predicted_rate_exponent(integrable) == -0.25);

  DecayModel decay;
  decay.integrable = false;
  decay.alpha = 0.5;
  decay.K = 1.0;
  decay.M = 0.375;
  decay.regime = DecayRegime::kTvPrimeTo0;
  CHECK(predicted_rate(decay, 1e4) == Catch::Approx(std::pow(10.0, -0.5)).epsilon(1e-12));
  CHECK(predicted_rate_exponent(decay) == Catch::Approx(-0.125));

  for (const DecayModel& model : {integrable, decay}) {
    double prev = 1e300;
    for (double t : {4.0, 16.0, 64.0, 256.0, 1024.0}) {
      const double rate = predicted_rate(model, t);
      CHECK(rate < prev);
      prev = rate;
    }
  }
}

TEST_CASE("simulated functional is centered and deterministic", "[subclt]") {
  const auto model = StationaryCovariance::fgn_increment(0.75);
  const auto decay = fit_condition_star(model, 1e4);
  const auto f = subordinator_identity();

  const auto samples = simulate_F_T(model, f, decay, 64.0, 0.25, 4000, 11, 4);
  const double mean = mean_of(samples);
  const double sd = std::sqrt(variance_of(samples));
  CHECK(std::abs(mean) <= 4.0 * sd / std::sqrt(4000.0));

  const auto repeat = simulate_F_T(model, f, decay, 64.0, 0.25, 4000, 11, 1);
  CHECK(samples == repeat);

  CHECK_THROWS_AS(simulate_F_T(model, f, decay, 64.0, 2.0, 100, 1, 1), DomainError);
  CHECK_THROWS_AS(simulate_F_T(model, f, decay, 64.0, 0.25, 1, 1, 1), UsageError);
}

TEST_CASE("simulated variance approaches the limit", "[subclt]") {
  const auto model = StationaryCovariance::fgn_increment(0.75);
  const auto decay = fit_condition_star(model, 1e4);
  const auto f = subordinator_identity();
  const auto samples = simulate_F_T(model, f, decay, 512.0, 0.25, 2500, 29, 8);
  const double var = variance_of(samples);
  CHECK(std::abs(var - 0.75) < 0.15 * 0.75);
}

TEST_CASE("integrable-branch variance: formula, discretization, simulation",
          "[subclt]") {
  // H < 1/2 makes the covariance integrable; the admissible subordinators
  // are the symmetric ones, so use f(x) = x^2 where Cov[f(X_t), f(X_s)] is
  // exactly 2 C(t-s)^2
  const auto model = StationaryCovariance::fgn_increment(0.25);
  const auto decay = fit_condition_star(model, 1e4);
  const auto f = subordinator_square();
  const auto exp = hermite_coefficients(f);
  CHECK(membership_in_M_C(f, exp, decay.integrable));
  const double sigma_sq = limiting_variance(model, decay, exp);

  // independent fine-trapezoid oracle for 4 int_0^inf C^2
  {
    double acc = 0.0;
    const double h = 1.0 / 4096.0;
    const std::size_t m = 1 << 24;
    for (std::size_t i = 0; i < m; ++i) {
      const double c = model(static_cast<double>(i) * h);
      acc += (i == 0 ? 0.5 : 1.0) * c * c;
    }
    const double oracle = 4.0 * acc * h;
    CHECK(sigma_sq == Catch::Approx(oracle).epsilon(1e-2));
  }

  // the discretized functional has its own exact variance on the grid;
  // the simulation must match it within Monte Carlo error
  auto discrete_variance = [&](double step, double horizon) {
    const std::size_t n = static_cast<std::size_t>(horizon / step + 0.5) + 1;
    std::vector<double> c2(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double c = model(static_cast<double>(k) * step);
      c2[k] = c * c;
    }
    auto weight = [&](std::size_t i) { return i == 0 || i + 1 == n ? 0.5 : 1.0; };
    double acc = 0.0;  // sum over (i, j) of w_i w_j C((i-j)h)^2
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        acc += weight(i) * weight(j) * c2[i >= j ? i - j : j - i];
    return 2.0 * acc * step * step / horizon;
  };
  const double target_coarse = discrete_variance(0.25, 256.0);
  const auto samples = simulate_F_T(model, f, decay, 256.0, 0.25, 4000, 3, 8);
  const double var = variance_of(samples);
  const double mean = mean_of(samples);
  double m4 = 0.0;
  for (double v : samples) m4 += std::pow(v - mean, 4.0);
  m4 /= static_cast<double>(samples.size());
  const double se = std::sqrt((m4 - var * var) / static_cast<double>(samples.size()));
  CHECK(std::abs(var - target_coarse) <= 4.0 * se);

  // refining the grid moves the discrete variance toward the limit
  const double target_fine = discrete_variance(0.0625, 256.0);
  CHECK(std::abs(target_fine - sigma_sq) < std::abs(target_coarse - sigma_sq));
}

TEST_CASE("time-step halving leaves the variance stable", "[subclt]") {
  const auto model = StationaryCovariance::fgn_increment(0.75);
  const auto decay = fit_condition_star(model, 1e4);
  const auto f = subordinator_identity();
  const std::size_t n = 10000;
  const double coarse = variance_of(simulate_F_T(model, f, decay, 32.0, 0.25, n, 5, 8));
  const double fine = variance_of(simulate_F_T(model, f, decay, 32.0, 0.125, n, 6, 8));
  const double se = coarse * std::sqrt(2.0 / static_cast<double>(n));
  CHECK(std::abs(coarse - fine) < 0.02 * coarse + 3.0 * se);
}

TEST_CASE("standardized expansion scales the coefficients", "[subclt]") {
  // f(x) = x^2 on a field of variance c0: f(sqrt(c0) z) = c0 (1 + H_2(z))
  const double c0 = 2.3;
  const auto exp = standardized_expansion(subordinator_square(), std::sqrt(c0), 8);
  CHECK(exp.c[0] == Catch::Approx(c0).epsilon(1e-12));
  CHECK(exp.c[2] == Catch::Approx(c0).epsilon(1e-12));
  // Cov[X_t^2, X_s^2] = 2 C(t-s)^2 follows for any field scale
  CHECK(subordinated_covariance(exp, 0.4) ==
        Catch::Approx(2.0 * (0.4 * c0) * (0.4 * c0)).epsilon(1e-11));
}

TEST_CASE("frac-OU pipeline: fitted limit variance matches simulation", "[subclt]") {
  // non-unit C(0): the limit variance 2 M c1^2 / C(0) with the standardized
  // c1 = sqrt(C(0)) reduces to 2M for f(x) = x
  const auto model = StationaryCovariance::frac_ou(0.75, 2.0, 1.0);
  const auto decay = fit_condition_star(model, 400.0);
  const auto f = subordinator_identity();
  const auto exp = standardized_expansion(f, std::sqrt(model.c0()));
  const double sigma_sq = limiting_variance(model, decay, exp);
  CHECK(sigma_sq == Catch::Approx(2.0 * decay.M).epsilon(1e-9));
  CHECK(std::abs(sigma_sq - 0.1875) < 0.02 * 0.1875);

  const auto samples = simulate_F_T(model, f, decay, 192.0, 0.25, 3000, 17, 8);
  const double var = variance_of(samples);
  CHECK(std::abs(var - sigma_sq) < 0.2 * sigma_sq);
}

TEST_CASE("Gaussian first-chaos variance identity", "[subclt]") {
  // for f(x) = x the functional is first chaos: Var equals
  // Vtilde^{-1} ∫∫ C(t-s), with equality rather than inequality
  const auto model = StationaryCovariance::fgn_increment(0.75);
  const auto decay = fit_condition_star(model, 1e4);
  const double horizon = 64.0;

  const std::size_t m = 1 << 13;
  const Grid grid(0.0, horizon, m);
  std::vector<double> weighted(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double y = grid.point(i);
    weighted[i] = (horizon - y) * model(y);
  }
  const double analytic =
      2.0 * grid_integral(weighted, grid) / v_tilde(decay, horizon);

  const std::size_t n = 6000;
  const auto samples =
      simulate_F_T(model, subordinator_identity(), decay, horizon, 0.25, n, 8, 8);
  const double var = variance_of(samples);
  const double se = analytic * std::sqrt(2.0 / static_cast<double>(n));
  CHECK(var <= analytic + 4.0 * se);
  CHECK(std::abs(var - analytic) <= 4.0 * se);
}

TEST_CASE("closed-form bound terms", "[subclt]") {
  const auto model = StationaryCovariance::fgn_increment(0.75);
  const auto decay = fit_condition_star(model, 1e4);

  const auto [lin1_256, lin2_256] =
      gaussian_bound_terms(model, subordinator_identity(), decay, 256.0);
  CHECK(lin2_256 == 0.0);  // f'' vanishes identically

  const auto [lin1_1024, lin2_1024] =
      gaussian_bound_terms(model, subordinator_identity(), decay, 1024.0);
  CHECK(lin1_1024 / lin1_256 > 0.5);
  CHECK(lin1_1024 / lin1_256 < 2.0);

  const auto [sq1_128, sq2_128] =
      gaussian_bound_terms(model, subordinator_square(), decay, 128.0);
  const auto [sq1_1024, sq2_1024] =
      gaussian_bound_terms(model, subordinator_square(), decay, 1024.0);
  CHECK(sq2_1024 < sq2_128);
  CHECK(sq1_128 > 0.0);
  CHECK(sq1_1024 > 0.0);
}

TEST_CASE("sweep applies the admissibility gate", "[subclt]") {
  const auto model = StationaryCovariance::fgn_increment(0.75);
  const auto decay = fit_condition_star(model, 1e4);
  const auto sq = hermite_coefficients(subordinator_square());
  CHECK_THROWS_AS(clt_sweep(model, subordinator_square(), decay, sq, {16.0, 32.0},
                            0.25, 200, 1, 1),
                  TheoremError);

  const auto lin = hermite_coefficients(subordinator_identity());
  const auto reports =
      clt_sweep(model, subordinator_identity(), decay, lin, {16.0, 32.0}, 0.25, 400, 1, 4);
  REQUIRE(reports.size() == 2);
  // the limit variance uses the fitted M, accurate to ~1e-7 here
  CHECK(reports[0].sigma_sq_limit == Catch::Approx(0.75).epsilon(1e-5));
  CHECK(reports[0].T == 16.0);
  CHECK(reports[1].predicted_rate < reports[0].predicted_rate);
  CHECK(reports[0].n == 400);
  CHECK(reports[0].empirical_dw.value >= 0.0);
}
