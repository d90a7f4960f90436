#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace xferod {

/// Dense C-order float32 tensor with 2 or 3 dimensions. A feature map is
/// (C, H, W); a feature matrix is (n, D).
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor. Throws InvalidData on rank outside {2, 3} or a zero extent.
  explicit Tensor(std::vector<std::size_t> shape);
  /// Takes ownership of data; its length must equal the shape product.
  Tensor(std::vector<std::size_t> shape, std::vector<float> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const float> values() const { return data_; }
  std::span<float> values() { return data_; }

  float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Contiguous H*W plane of channel c of a rank-3 tensor.
  std::span<const float> channel(std::size_t c) const {
    const std::size_t plane = shape_[1] * shape_[2];
    return std::span<const float>(data_).subspan(c * plane, plane);
  }

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

/// Reads an NPY v1.0 file holding little-endian float32 in C order with 2 or
/// 3 dimensions. Payload bytes are copied verbatim.
///
/// Throws IoError if the file cannot be opened, FormatError on a malformed
/// magic string, header or payload length, UnsupportedTensor on any other
/// dtype, Fortran order or rank, and InvalidData on zero extents or
/// non-finite values.
Tensor read_tensor(const std::filesystem::path& path);

/// Writes an NPY v1.0 file (`<f4`, C order). The header is padded with spaces
/// so that the preamble plus header is a multiple of 16 bytes.
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);

/// In-memory variants used by the file functions.
std::vector<char> encode_npy(const Tensor& tensor);
Tensor decode_npy(std::span<const char> bytes);

}  // namespace xferod
