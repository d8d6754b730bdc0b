#pragma once

#include <cstdint>

namespace distr {

/// Counter-based generator: the i-th draw of a stream is
/// splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15). The output only depends on
/// (seed, counter), so streams are identical on every platform and can be
/// split into independent substreams without sharing state.
class Rng {
 public:
  explicit constexpr Rng(std::uint64_t seed) noexcept : seed_(seed) {}

  /// Independent stream for work item `index` of a run seeded with `seed`.
  static Rng substream(std::uint64_t seed, std::uint64_t index) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1), 23 bits of resolution so the value
  /// is exactly representable as a 32-bit float.
  float next_uniform() noexcept;

  /// Standard normal via Box-Muller on two uniforms.
  float next_normal() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace distr
