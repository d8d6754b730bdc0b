#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "distr/rng.hpp"

namespace distr {

/// Dense row-major matrix of 32-bit reals. Never empty.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Copy of rows [first, first + count).
  Matrix slice_rows(std::size_t first, std::size_t count) const;

  /// Column `c` as a vector.
  std::vector<float> column(std::size_t c) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<float> data_;
};

/// I.i.d. uniform(0, 1) entries, drawn in row-major order.
Matrix random_uniform(Rng& rng, std::size_t rows, std::size_t cols);

/// I.i.d. standard normal entries, drawn in row-major order.
Matrix random_normal(Rng& rng, std::size_t rows, std::size_t cols);

/// a * b with 32-bit accumulation in ascending inner index order.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Numerically stable row-wise softmax. -inf entries get probability 0;
/// a row that is entirely -inf is a PreconditionError.
Matrix softmax_rows(const Matrix& s);

/// Accumulates out[r][:] += a[r][k] * b[k][:] for k ascending. Shapes are the
/// caller's responsibility; this is the shared inner kernel for every product.
void gemm_accumulate(std::span<const float> a, std::span<const float> b, std::span<float> out,
                     std::size_t rows, std::size_t inner, std::size_t cols) noexcept;

}  // namespace distr
