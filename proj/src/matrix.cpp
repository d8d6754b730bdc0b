#include "distr/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "distr/errors.hpp"

namespace distr {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw ShapeError("matrix dimensions must be positive");
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

Matrix Matrix::slice_rows(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > rows_) throw ShapeError("row slice out of range");
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * cols_);
  return Matrix(count, cols_,
                std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(count * cols_)));
}

std::vector<float> Matrix::column(std::size_t c) const {
  std::vector<float> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix random_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (float& x : m.data()) x = rng.next_uniform();
  return m;
}

Matrix random_normal(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (float& x : m.data()) x = rng.next_normal();
  return m;
}

void gemm_accumulate(std::span<const float> a, std::span<const float> b, std::span<float> out,
                     std::size_t rows, std::size_t inner, std::size_t cols) noexcept {
  for (std::size_t r = 0; r < rows; ++r) {
    float* __restrict dst = out.data() + r * cols;
    const float* arow = a.data() + r * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const float coef = arow[k];
      const float* __restrict src = b.data() + k * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += coef * src[c];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  gemm_accumulate(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix softmax_rows(const Matrix& s) {
  Matrix out(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto in = s.row(r);
    const float mx = *std::max_element(in.begin(), in.end());
    if (mx == -std::numeric_limits<float>::infinity()) {
      throw PreconditionError("softmax_rows: row " + std::to_string(r) + " is entirely -inf");
    }
    auto dst = out.row(r);
    float sum = 0.0f;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = std::exp(in[c] - mx);
      sum += dst[c];
    }
    const float inv = 1.0f / sum;
    for (float& x : dst) x *= inv;
  }
  return out;
}

}  // namespace distr
