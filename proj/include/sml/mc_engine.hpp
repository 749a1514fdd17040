#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sml/errors.hpp"
#include "sml/io.hpp"
#include "sml/rng.hpp"

namespace sml {

struct MCConfig {
  std::size_t n_replicates = 1;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;
  std::size_t chunk = 64;  // replicates handed to a worker at a time
};

// Tree reduction with a fixed association order, so sums are identical no
// matter how replicates were scheduled.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 64) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double mean_of(std::span<const double> x) {
  return pairwise_sum(x) / static_cast<double>(x.size());
}

// Unbiased sample variance, pairwise-reduced.
inline double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - m) * (x[i] - m);
  return pairwise_sum(sq) / static_cast<double>(x.size() - 1);
}

// Runs task(i) for i in [0, n) on a worker pool. Results are keyed by index,
// so output does not depend on scheduling. Failures are collected and
// reported together with their replicate indices.
inline void parallel_for(std::size_t n, unsigned workers, std::size_t chunk,
                         const std::function<void(std::size_t)>& task) {
  workers = std::max(1u, workers);
  chunk = std::max<std::size_t>(1, chunk);

  std::vector<std::pair<std::size_t, std::string>> failures;
  std::mutex failure_mutex;

  auto guarded = [&](std::size_t i) {
    try {
      task(i);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      failures.emplace_back(i, e.what());
    }
  };

  if (workers == 1 || n <= chunk) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= n) return;
        const std::size_t end = std::min(n, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) guarded(i);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    std::string msg = "replicates failed at indices";
    const std::size_t shown = std::min<std::size_t>(failures.size(), 8);
    for (std::size_t k = 0; k < shown; ++k)
      msg += (k ? "," : " ") + std::to_string(failures[k].first);
    if (failures.size() > shown)
      msg += ",... (" + std::to_string(failures.size()) + " total)";
    msg += "; first error: " + failures.front().second;
    throw NumericalError(msg);
  }
}

struct EnsembleResult {
  std::vector<std::string> names;
  std::vector<double> estimates;
  std::vector<double> standard_errors;
  std::size_t n = 0;
  std::uint64_t master_seed = 0;
  std::string manifest;  // config echo + content hash, JSON

  double estimate(const std::string& name) const { return at(estimates, name); }
  double standard_error(const std::string& name) const {
    return at(standard_errors, name);
  }

 private:
  double at(const std::vector<double>& column, const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return column[i];
    throw UsageError("EnsembleResult: unknown estimate '" + name + "'");
  }
};

// Replicates a task over (seed, replicate_index)-derived streams and
// aggregates per-quantity means and standard errors in replicate order.
inline EnsembleResult run_ensemble(
    const std::function<std::vector<double>(std::size_t, RngStream&)>& task,
    std::vector<std::string> names, const MCConfig& config) {
  if (config.n_replicates == 0)
    throw UsageError("run_ensemble: n_replicates must be >= 1");
  if (names.empty()) throw UsageError("run_ensemble: names must be non-empty");

  const std::size_t k = names.size();
  const std::size_t n = config.n_replicates;
  std::vector<double> table(n * k);
  std::atomic<bool> width_ok{true};

  parallel_for(n, config.workers, config.chunk, [&](std::size_t i) {
    RngStream stream = derive_stream(config.master_seed, i, stream_tag::kMcTask);
    const std::vector<double> row = task(i, stream);
    if (row.size() != k) {
      width_ok = false;
      return;
    }
    std::copy(row.begin(), row.end(), table.begin() + static_cast<std::ptrdiff_t>(i * k));
  });
  if (!width_ok)
    throw UsageError("run_ensemble: task returned a row of unexpected width");

  EnsembleResult result;
  result.names = std::move(names);
  result.n = n;
  result.master_seed = config.master_seed;
  {
    json echo;
    echo["n_replicates"] = n;
    echo["master_seed"] = config.master_seed;
    echo["quantities"] = result.names;
    result.manifest = manifest_string(std::move(echo));
  }
  result.estimates.resize(k);
  result.standard_errors.resize(k);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = table[i * k + j];
    const double mean = mean_of(column);
    result.estimates[j] = mean;
    result.standard_errors[j] =
        n > 1 ? std::sqrt(variance_of(column) / static_cast<double>(n)) : 0.0;
  }
  return result;
}

}  // namespace sml
