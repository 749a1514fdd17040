#pragma once

#include <cmath>
#include <cstdint>

namespace sml {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ull;

// SplitMix64 output mixing (Steele/Lea/Vigna constants).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Counter-based stream: output i is mix64(key + (i+1)*gamma), i.e. the
// SplitMix64 sequence started at a derived key. Streams are value types;
// copying one forks the full future sequence.
class RngStream {
 public:
  explicit constexpr RngStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += kSplitMixGamma;
    return mix64(state_);
  }

  // Uniform on the open interval (0,1) with 53-bit resolution.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // One N(0,1) variate per call: cosine branch of the Box-Muller transform,
  // consuming exactly two uniforms. Chosen once for cross-run stability.
  double next_normal() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double next_exponential() { return -std::log(next_uniform()); }

 private:
  std::uint64_t state_;
};

// Component tags for stream derivation. The low byte identifies the
// component; bits 8+ are free for per-experiment offsets (epsilon index,
// horizon index, ...).
namespace stream_tag {
inline constexpr std::uint64_t kGaussianPath = 0x01;
inline constexpr std::uint64_t kSubordinated = 0x02;
inline constexpr std::uint64_t kWienerOu = 0x03;
inline constexpr std::uint64_t kPoissonOu = 0x04;
inline constexpr std::uint64_t kBigJumps = 0x05;
inline constexpr std::uint64_t kSmallJumpSlices = 0x06;
inline constexpr std::uint64_t kSmallJumpGauss = 0x07;
inline constexpr std::uint64_t kFlpJumps = 0x08;
inline constexpr std::uint64_t kFlpGauss = 0x09;
inline constexpr std::uint64_t kBootstrap = 0x0A;
inline constexpr std::uint64_t kMcTask = 0x0B;
inline constexpr std::uint64_t kPoincare = 0x0C;
}  // namespace stream_tag

// Statistically independent, reproducible sub-stream keyed by
// (master_seed, path_index, component_tag); a three-word hash chain of
// SplitMix64 finalizers.
inline RngStream derive_stream(std::uint64_t master_seed,
                               std::uint64_t path_index,
                               std::uint64_t component_tag) {
  std::uint64_t h = mix64(master_seed ^ 0x243F6A8885A308D3ull);
  h = mix64(h ^ (path_index * kSplitMixGamma + 0xB7E151628AED2A6Bull));
  h = mix64(h ^ (component_tag * 0xBF58476D1CE4E5B9ull + 0x452821E638D01377ull));
  return RngStream(h);
}

}  // namespace sml
