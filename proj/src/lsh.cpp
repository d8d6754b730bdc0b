#include "distr/lsh.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "distr/errors.hpp"

namespace distr {

Projection build_projection(std::uint64_t seed, std::size_t hash_width, std::size_t block_height) {
  if (hash_width < 1 || hash_width > kMaxHashWidth) {
    throw PreconditionError("hash width must be in [1, " + std::to_string(kMaxHashWidth) + "]");
  }
  if (block_height < 1) throw PreconditionError("projection block height must be positive");
  Rng rng(seed);
  return Projection{hash_width, block_height, seed,
                    random_normal(rng, hash_width, block_height)};
}

std::uint32_t gray_rank(std::uint32_t pattern, std::size_t width) {
  if (width < 32 && pattern >> width != 0) {
    throw PreconditionError("gray_rank: pattern " + std::to_string(pattern) + " exceeds " +
                            std::to_string(width) + " bits");
  }
  std::uint32_t b = pattern;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) b ^= b >> shift;
  return b;
}

GrayTable::GrayTable(std::size_t width) : width_(width) {
  if (width < 1 || width > kMaxHashWidth) {
    throw PreconditionError("Gray table width must be in [1, " + std::to_string(kMaxHashWidth) +
                            "]");
  }
  entries_.resize(std::size_t{1} << width);
  for (std::uint32_t r = 0; r < entries_.size(); ++r) entries_[gray_encode(r)] = r;
}

std::uint32_t sign_pattern(std::span<const float> col, const Projection& proj) {
  if (col.size() > proj.block_height) {
    throw ShapeError("column of length " + std::to_string(col.size()) +
                     " exceeds projection height " + std::to_string(proj.block_height));
  }
  std::uint32_t pattern = 0;
  for (std::size_t i = 0; i < proj.hash_width; ++i) {
    const auto w = proj.weights.row(i);
    float y = 0.0f;
    for (std::size_t k = 0; k < col.size(); ++k) y += w[k] * col[k];
    if (y > 0.0f) pattern |= std::uint32_t{1} << i;
  }
  return pattern;
}

std::uint32_t hash_column(std::span<const float> col, const Projection& proj,
                          const GrayTable& table) {
  if (col.size() != proj.block_height) {
    throw ShapeError("hash_column: column length " + std::to_string(col.size()) +
                     " != projection height " + std::to_string(proj.block_height));
  }
  if (proj.hash_width != table.width()) throw ShapeError("hash_column: width mismatch");
  return table[sign_pattern(col, proj)];
}

std::vector<std::uint32_t> hash_block(const Matrix& q_block, const Projection& proj,
                                      const GrayTable& table, std::uint64_t* mults) {
  const std::size_t rows = q_block.rows();
  const std::size_t d = q_block.cols();
  if (rows > proj.block_height) {
    throw ShapeError("hash_block: block has " + std::to_string(rows) + " rows, projection " +
                     std::to_string(proj.block_height));
  }
  if (proj.hash_width != table.width()) throw ShapeError("hash_block: width mismatch");

  // y = W[:, :rows] * q_block, accumulated row by row so the inner loop runs
  // over contiguous columns.
  Matrix y(proj.hash_width, d);
  for (std::size_t i = 0; i < proj.hash_width; ++i) {
    auto dst = y.row(i);
    const auto w = proj.weights.row(i);
    for (std::size_t k = 0; k < rows; ++k) {
      const float coef = w[k];
      const auto src = q_block.row(k);
      for (std::size_t j = 0; j < d; ++j) dst[j] += coef * src[j];
    }
  }
  if (mults != nullptr) *mults += proj.hash_width * rows * d;

  std::vector<std::uint32_t> hashes(d, 0);
  for (std::size_t i = 0; i < proj.hash_width; ++i) {
    const auto yi = y.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (yi[j] > 0.0f) hashes[j] |= std::uint32_t{1} << i;
    }
  }
  for (auto& h : hashes) h = table[h];
  return hashes;
}

std::vector<std::uint32_t> sort_permutation(std::span<const std::uint32_t> hashes) {
  std::vector<std::uint32_t> perm(hashes.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return hashes[a] < hashes[b]; });
  return perm;
}

}  // namespace distr
