#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distr/matrix.hpp"

namespace distr {

// DTNS v1 layout, all integers little-endian:
//   "DTNS" | u32 version (1) | u32 dtype (0 = f32) | u32 ndim | ndim x u64 dims | payload
// Payload is row-major little-endian f32.
inline constexpr std::uint32_t kDtnsVersion = 1;
inline constexpr std::uint32_t kDtnsFloat32 = 0;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

std::vector<std::uint8_t> encode_dtns(const Tensor& t);
Tensor decode_dtns(std::span<const std::uint8_t> bytes);

void write_dtns(const std::filesystem::path& path, const Tensor& t);
Tensor read_dtns(const std::filesystem::path& path);

/// A stack of equally shaped matrices as a (count, rows, cols) tensor; a single
/// matrix is written as a 2-D tensor.
Tensor stack_matrices(std::span<const Matrix> mats);

/// Inverse of stack_matrices. 2-D tensors yield one matrix.
std::vector<Matrix> unstack_matrices(const Tensor& t);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace distr
