#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include <zlib.h>

#include "logsy/encoder.hpp"

namespace logsy::detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

inline void append_f64_le(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  char buf[8];
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<char>(bits & 0xFFu);
    bits >>= 8;
  }
  out.append(buf, 8);
}

inline double read_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) {
    bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  }
  return std::bit_cast<double>(bits);
}

/// Row-major little-endian float64.
inline void append_tensor(std::string& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64_le(out, m(r, c));
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  constexpr std::size_t kChunk = 1u << 30;
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min(kChunk, bytes.size() - off);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off),
                static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string params_payload(const ModelParams& params) {
  std::string out;
  out.reserve(params.parameter_count() * 8);
  params.for_each_tensor([&out](const std::string&, const Matrix& m) { append_tensor(out, m); });
  return out;
}

inline std::string hex32(std::uint32_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(8, '0');
  for (int i = 7; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xFu];
    v >>= 4;
  }
  return s;
}

}  // namespace logsy::detail
