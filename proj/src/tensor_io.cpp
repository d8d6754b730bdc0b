#include "distr/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "distr/errors.hpp"

namespace distr {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    if (pos_ + sizeof(T) > bytes_.size()) throw IoError("DTNS: truncated header");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<std::uint8_t> encode_dtns(const Tensor& t) {
  if (t.element_count() != t.data.size()) throw ShapeError("DTNS: dims do not match payload");
  std::vector<std::uint8_t> out;
  out.reserve(16 + 8 * t.dims.size() + 4 * t.data.size());
  for (char c : {'D', 'T', 'N', 'S'}) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint32_t>(out, kDtnsVersion);
  put_le<std::uint32_t>(out, kDtnsFloat32);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_le<std::uint64_t>(out, d);
  for (float x : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

Tensor decode_dtns(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DTNS", 4) != 0) {
    throw IoError("DTNS: bad magic");
  }
  Reader in(bytes);
  in.skip(4);
  if (const auto version = in.get_le<std::uint32_t>(); version != kDtnsVersion) {
    throw IoError("DTNS: unsupported version " + std::to_string(version));
  }
  if (const auto dtype = in.get_le<std::uint32_t>(); dtype != kDtnsFloat32) {
    throw IoError("DTNS: unsupported dtype " + std::to_string(dtype));
  }
  const auto ndim = in.get_le<std::uint32_t>();
  Tensor t;
  for (std::uint32_t i = 0; i < ndim; ++i) t.dims.push_back(in.get_le<std::uint64_t>());
  const auto payload = in.rest();
  const std::size_t count = t.element_count();
  if (payload.size() != 4 * count) {
    throw IoError("DTNS: payload has " + std::to_string(payload.size()) + " bytes, expected " +
                  std::to_string(4 * count));
  }
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
    }
    t.data[i] = std::bit_cast<float>(bits);
  }
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_dtns(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_dtns(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_dtns(const std::filesystem::path& path) { return decode_dtns(read_file_bytes(path)); }

Tensor stack_matrices(std::span<const Matrix> mats) {
  if (mats.empty()) throw ShapeError("stack_matrices: empty input");
  const auto rows = mats.front().rows();
  const auto cols = mats.front().cols();
  Tensor t;
  if (mats.size() == 1) {
    t.dims = {rows, cols};
  } else {
    t.dims = {mats.size(), rows, cols};
  }
  t.data.reserve(mats.size() * rows * cols);
  for (const auto& m : mats) {
    if (m.rows() != rows || m.cols() != cols) throw ShapeError("stack_matrices: ragged stack");
    t.data.insert(t.data.end(), m.data().begin(), m.data().end());
  }
  return t;
}

std::vector<Matrix> unstack_matrices(const Tensor& t) {
  std::size_t count = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (t.dims.size() == 2) {
    rows = t.dims[0];
    cols = t.dims[1];
  } else if (t.dims.size() == 3) {
    count = t.dims[0];
    rows = t.dims[1];
    cols = t.dims[2];
  } else {
    throw ShapeError("expected a 2-D or 3-D tensor, got " + std::to_string(t.dims.size()) + "-D");
  }
  if (count == 0 || rows == 0 || cols == 0) throw ShapeError("tensor has an empty dimension");
  std::vector<Matrix> out;
  out.reserve(count);
  const std::size_t step = rows * cols;
  for (std::size_t i = 0; i < count; ++i) {
    const auto begin = t.data.begin() + static_cast<std::ptrdiff_t>(i * step);
    out.emplace_back(rows, cols,
                     std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(step)));
  }
  return out;
}

}  // namespace distr
