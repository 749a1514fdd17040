#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sml/distance.hpp"
#include "sml/rng.hpp"

using namespace sml;

namespace {
std::vector<double> normal_sample(std::size_t n, double mu, double sigma,
                                  std::uint64_t seed) {
  std::vector<double> out(n);
  RngStream stream = derive_stream(seed, 0, 0x77);
  for (double& x : out) x = mu + sigma * stream.next_normal();
  return out;
}
}  // namespace

TEST_CASE("normal quantile inverts the CDF", "[distance]") {
  for (double p : {1e-9, 1e-4, 0.02, 0.31, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    CHECK(normal_cdf(normal_quantile(p)) == Catch::Approx(p).epsilon(1e-12));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
}

TEST_CASE("W1 of a point mass at the mean", "[distance]") {
  const std::vector<double> constant(100, 0.7);
  const DistanceEstimate est = empirical_w1_to_normal(constant, 0.7, 2.0);
  CHECK(est.value == Catch::Approx(2.0 * std::sqrt(2.0 / kPi)).epsilon(1e-12));
  CHECK(est.n == 100);
}

TEST_CASE("W1 of a large exact-normal sample is small", "[distance]") {
  const auto samples = normal_sample(100000, 0.0, 1.0, 31);
  const DistanceEstimate est = empirical_w1_to_normal(samples, 0.0, 1.0);
  CHECK(est.value < 0.01);
  CHECK(est.standard_error > 0.0);
}

TEST_CASE("W1 affine equivariance", "[distance]") {
  const auto samples = normal_sample(4000, 0.3, 1.2, 77);
  const DistanceEstimate base = empirical_w1_to_normal(samples, 0.1, 0.9);
  const double a = 2.5, b = -4.0;
  std::vector<double> moved(samples);
  for (double& x : moved) x = a * x + b;
  const DistanceEstimate scaled = empirical_w1_to_normal(moved, a * 0.1 + b, a * 0.9);
  CHECK(scaled.value == Catch::Approx(a * base.value).epsilon(1e-12));
}

TEST_CASE("W1 consistency on a mean-shifted normal", "[distance]") {
  // W1 between N(0.2, 1) and N(0, 1) is exactly 0.2
  const auto samples = normal_sample(100000, 0.2, 1.0, 99);
  const DistanceEstimate est = empirical_w1_to_normal(samples, 0.0, 1.0);
  CHECK(std::abs(est.value - 0.2) <= 3.0 * est.standard_error + 0.005);
}

TEST_CASE("W1 is permutation invariant", "[distance]") {
  auto samples = normal_sample(512, 0.0, 1.0, 5);
  const DistanceEstimate a = empirical_w1_to_normal(samples, 0.0, 1.0);
  std::reverse(samples.begin(), samples.end());
  std::swap(samples[3], samples[200]);
  const DistanceEstimate b = empirical_w1_to_normal(samples, 0.0, 1.0);
  CHECK(a.value == b.value);
  CHECK(a.standard_error == b.standard_error);
}

TEST_CASE("W1 matches a brute-force Riemann sum of the CDF gap", "[distance]") {
  RngStream stream = derive_stream(123, 9, 9);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> samples(50 + 37 * trial);
    for (double& x : samples)
      x = stream.next_normal() + (stream.next_uniform() < 0.1 ? 4.0 : 0.0);
    const double mu = 0.3 * stream.next_normal();
    const double sigma = 0.5 + stream.next_uniform();

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const double lo = std::min(sorted.front(), mu - 10.0 * sigma);
    const double hi = std::max(sorted.back(), mu + 10.0 * sigma);
    const std::size_t m = 400000;
    const double h = (hi - lo) / static_cast<double>(m);
    double brute = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = lo + (static_cast<double>(i) + 0.5) * h;
      while (idx < sorted.size() && sorted[idx] <= x) ++idx;
      const double fn = static_cast<double>(idx) / static_cast<double>(sorted.size());
      brute += std::abs(fn - normal_cdf((x - mu) / sigma));
    }
    brute *= h;

    const DistanceEstimate est = empirical_w1_to_normal(samples, mu, sigma);
    CHECK(est.value == Catch::Approx(brute).epsilon(2e-4));
  }
}

TEST_CASE("distance estimators validate input", "[distance]") {
  const std::vector<double> tiny{1.0};
  CHECK_THROWS_AS(empirical_w1_to_normal(tiny, 0.0, 1.0), UsageError);
  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(empirical_w1_to_normal(two, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(ks_to_normal(two, 0.0, -1.0), DomainError);
}

TEST_CASE("KS statistic reference behaviors", "[distance]") {
  const auto samples = normal_sample(10000, 0.0, 1.0, 13);
  const DistanceEstimate ks = ks_to_normal(samples, 0.0, 1.0);
  CHECK(ks.value < 1.63 / std::sqrt(10000.0));

  const std::vector<double> constant(50, 0.0);
  CHECK(ks_to_normal(constant, 0.0, 1.0).value == Catch::Approx(0.5).margin(1e-12));

  // the KS distance between N(3,1) and N(0,1) is 2 Phi(1.5) - 1
  auto shifted = normal_sample(10000, 3.0, 1.0, 17);
  const double oracle = 2.0 * normal_cdf(1.5) - 1.0;
  CHECK(std::abs(ks_to_normal(shifted, 0.0, 1.0).value - oracle) < 0.02);
  CHECK(ks_to_normal(shifted, 0.0, 1.0).value > 0.8);
}

TEST_CASE("both statistics decrease along nested prefixes", "[distance]") {
  const auto samples = normal_sample(10000, 0.0, 1.0, 23);
  double prev_w1 = 1e9, prev_ks = 1e9;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const std::vector<double> prefix(samples.begin(), samples.begin() + n);
    const double w1 = empirical_w1_to_normal(prefix, 0.0, 1.0).value;
    const double ks = ks_to_normal(prefix, 0.0, 1.0).value;
    CHECK(w1 < prev_w1);
    CHECK(ks < prev_ks);
    prev_w1 = w1;
    prev_ks = ks;
  }
}
