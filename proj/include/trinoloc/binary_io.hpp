#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "trinoloc/errors.hpp"

namespace trinoloc {

/// Append-only little-endian byte buffer used by the on-disk formats.
class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void put_u16(std::uint16_t v) { put_le(v); }
  void put_u32(std::uint32_t v) { put_le(v); }
  void put_u64(std::uint64_t v) { put_le(v); }

  void put_f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_le(bits);
  }
  void put_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_le(bits);
  }

  void put_bytes(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }
  void put_magic(const char (&magic)[5]) { buf_.append(magic, 4); }

  /// Column-major float payload, prefixed with rows/cols.
  void put_matrix_f32(const Eigen::MatrixXf& m) {
    put_u32(static_cast<std::uint32_t>(m.rows()));
    put_u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) put_f32(m(i, j));
  }

  const std::string& bytes() const { return buf_; }

 private:
  template <typename T>
  void put_le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  std::string buf_;
};

/// Bounds-checked little-endian reader over an in-memory file image.
/// Short reads surface as IoError{truncated}.
class ByteReader {
 public:
  explicit ByteReader(const std::string& data) : data_(data) {}

  std::uint8_t get_u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint16_t get_u16() { return get_le<std::uint16_t>(); }
  std::uint32_t get_u32() { return get_le<std::uint32_t>(); }
  std::uint64_t get_u64() { return get_le<std::uint64_t>(); }

  float get_f32() {
    std::uint32_t bits = get_le<std::uint32_t>();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  double get_f64() {
    std::uint64_t bits = get_le<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  void expect_magic(const char (&magic)[5], const std::string& what) {
    const char* p = take(4);
    if (std::memcmp(p, magic, 4) != 0)
      throw IoError(IoErrorKind::bad_magic, what + ": bad magic");
  }

  Eigen::MatrixXf get_matrix_f32() {
    const auto rows = get_u32();
    const auto cols = get_u32();
    if (rows > (1u << 24) || cols > (1u << 24))
      throw IoError(IoErrorKind::malformed, "matrix dimensions out of range");
    Eigen::MatrixXf m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = get_f32();
    return m;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  const char* take(std::size_t n) {
    if (pos_ + n > data_.size())
      throw IoError(IoErrorKind::truncated, "unexpected end of file at byte " +
                                                std::to_string(pos_));
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  template <typename T>
  T get_le() {
    const char* p = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
  }

  const std::string& data_;
  std::size_t pos_ = 0;
};

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace trinoloc
