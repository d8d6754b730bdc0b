#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "distr/matrix.hpp"

namespace distr {

inline constexpr std::size_t kDefaultHashWidth = 16;
inline constexpr std::size_t kMaxHashWidth = 24;

/// Sign-random-projection weights: hash_width x block_height standard normals.
/// Built once per run and shared by every block, head and batch entry.
struct Projection {
  std::size_t hash_width;
  std::size_t block_height;
  std::uint64_t seed;
  Matrix weights;
};

Projection build_projection(std::uint64_t seed, std::size_t hash_width, std::size_t block_height);

/// Rank of `pattern` in the binary-reflected Gray sequence, i.e. the inverse of
/// g = b ^ (b >> 1). Throws PreconditionError if pattern >= 2^width.
std::uint32_t gray_rank(std::uint32_t pattern, std::size_t width);

/// Forward reflected Gray encoding of rank `r`.
constexpr std::uint32_t gray_encode(std::uint32_t r) noexcept { return r ^ (r >> 1); }

/// Lookup table pattern -> Gray rank for all 2^width patterns.
class GrayTable {
 public:
  explicit GrayTable(std::size_t width);

  std::size_t width() const noexcept { return width_; }
  std::span<const std::uint32_t> entries() const noexcept { return entries_; }
  std::uint32_t operator[](std::uint32_t pattern) const noexcept { return entries_[pattern]; }

 private:
  std::size_t width_;
  std::vector<std::uint32_t> entries_;
};

/// Sign pattern of proj.weights * col, bit i set iff projection row i is > 0.
/// Only the first col.size() weight columns are used; absent trailing entries
/// are zeros.
std::uint32_t sign_pattern(std::span<const float> col, const Projection& proj);

std::uint32_t hash_column(std::span<const float> col, const Projection& proj,
                          const GrayTable& table);

/// Hash of every column of a Q block. Blocks shorter than proj.block_height
/// are hashed as if zero-padded. `mults`, when given, is increased by the
/// number of projection multiplies performed.
std::vector<std::uint32_t> hash_block(const Matrix& q_block, const Projection& proj,
                                      const GrayTable& table, std::uint64_t* mults = nullptr);

/// Stable ascending argsort of hashes.
std::vector<std::uint32_t> sort_permutation(std::span<const std::uint32_t> hashes);

}  // namespace distr
