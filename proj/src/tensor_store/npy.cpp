#include "xferod/error.hpp"
#include "xferod/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>

namespace xferod {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreambleLen = kMagicLen + 2 + 2;  // magic, version, header length
constexpr std::size_t kHeaderAlign = 16;

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.size() != 2 && shape.size() != 3)
    throw InvalidData("tensor must have 2 or 3 dimensions, got " + std::to_string(shape.size()));
  for (auto d : shape)
    if (d == 0) throw InvalidData("tensor has an empty dimension");
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

// Minimal reader for the Python dict literal NPY stores in its header.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  std::string string_value(std::string_view key) {
    seek_value(key);
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected string for " + std::string(key));
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) fail("unterminated string");
    return std::string(text_.substr(pos_, end - pos_));
  }

  bool bool_value(std::string_view key) {
    seek_value(key);
    if (text_.substr(pos_, 4) == "True") return true;
    if (text_.substr(pos_, 5) == "False") return false;
    fail("expected boolean for " + std::string(key));
  }

  std::vector<std::size_t> tuple_value(std::string_view key) {
    seek_value(key);
    if (peek() != '(') fail("expected tuple for " + std::string(key));
    ++pos_;
    std::vector<std::size_t> out;
    while (true) {
      skip_space();
      if (peek() == ')') break;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("bad shape entry");
      std::size_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        v = v * 10 + static_cast<std::size_t>(text_[pos_] - '0');
        ++pos_;
      }
      out.push_back(v);
      skip_space();
      if (peek() == ',') ++pos_;
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("malformed NPY header: " + what);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void seek_value(std::string_view key) {
    std::optional<std::size_t> at;
    for (const char q : {'\'', '"'}) {
      const std::string quoted = std::string(1, q) + std::string(key) + q;
      if (auto p = text_.find(quoted); p != std::string_view::npos) {
        at = p + quoted.size();
        break;
      }
    }
    if (!at) fail("missing key " + std::string(key));
    pos_ = *at;
    skip_space();
    if (peek() != ':') fail("expected ':' after " + std::string(key));
    ++pos_;
    skip_space();
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string shape_literal(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != product(shape_))
    throw InvalidData("tensor data length does not match its shape");
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::vector<char> encode_npy(const Tensor& tensor) {
  check_shape(tensor.shape());
  if (!tensor.all_finite()) throw InvalidData("refusing to write non-finite tensor");

  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': " +
                       shape_literal(tensor.shape()) + ", }";
  const std::size_t unpadded = kPreambleLen + header.size() + 1;
  const std::size_t padding = (kHeaderAlign - unpadded % kHeaderAlign) % kHeaderAlign;
  header.append(padding, ' ');
  header.push_back('\n');

  const auto hlen = static_cast<std::uint16_t>(header.size());
  std::vector<char> out(kPreambleLen + header.size() + tensor.size() * 4);
  char* p = out.data();
  std::memcpy(p, kMagic, kMagicLen);
  p += kMagicLen;
  *p++ = 1;
  *p++ = 0;
  *p++ = static_cast<char>(hlen & 0xff);
  *p++ = static_cast<char>(hlen >> 8);
  std::memcpy(p, header.data(), header.size());
  p += header.size();

  for (const float v : tensor.values()) {
    const auto bits = to_little(std::bit_cast<std::uint32_t>(v));
    std::memcpy(p, &bits, 4);
    p += 4;
  }
  return out;
}

Tensor decode_npy(std::span<const char> bytes) {
  if (bytes.size() < kPreambleLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw FormatError("not an NPY file (bad magic string)");
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0)
    throw FormatError("unsupported NPY version " + std::to_string(major) + "." +
                      std::to_string(minor));
  const std::size_t hlen = static_cast<unsigned char>(bytes[8]) |
                           (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreambleLen + hlen) throw FormatError("truncated NPY header");

  HeaderParser parser(std::string_view(bytes.data() + kPreambleLen, hlen));
  const std::string descr = parser.string_value("descr");
  const bool fortran = parser.bool_value("fortran_order");
  const auto shape = parser.tuple_value("shape");

  if (descr != "<f4") throw UnsupportedTensor("unsupported dtype '" + descr + "', need '<f4'");
  if (fortran) throw UnsupportedTensor("Fortran-ordered arrays are not supported");
  if (shape.size() != 2 && shape.size() != 3)
    throw UnsupportedTensor("need 2 or 3 dimensions, got " + std::to_string(shape.size()));
  for (auto d : shape)
    if (d == 0) throw InvalidData("tensor has an empty dimension");

  const std::size_t count = product(shape);
  const auto payload = bytes.subspan(kPreambleLen + hlen);
  if (payload.size() != count * 4)
    throw FormatError("NPY payload has " + std::to_string(payload.size()) + " bytes, expected " +
                      std::to_string(count * 4));

  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, payload.data() + 4 * i, 4);
    data[i] = std::bit_cast<float>(to_little(bits));
    if (!std::isfinite(data[i])) throw InvalidData("tensor contains NaN or Inf");
  }
  return Tensor(shape, std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return decode_npy(bytes);
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  const auto bytes = encode_npy(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace xferod
