#include "distr/rng.hpp"

#include <cmath>
#include <numbers>

namespace distr {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t index) noexcept {
  return Rng(splitmix64(seed ^ splitmix64(index + kGolden)));
}

std::uint64_t Rng::next_u64() noexcept {
  ++counter_;
  return splitmix64(seed_ + counter_ * kGolden);
}

float Rng::next_uniform() noexcept {
  const auto bits = next_u64() >> 41;  // 23 bits
  return static_cast<float>((static_cast<double>(bits) + 0.5) * 0x1p-23);
}

float Rng::next_normal() noexcept {
  const double u1 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  const double u2 = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                            std::cos(2.0 * std::numbers::pi * u2));
}

}  // namespace distr
