#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include <zlib.h>

#include "moeids/errors.hpp"

namespace moeids::detail {

static_assert(std::endian::native == std::endian::little, "binary formats are little-endian");

/// Raw little-endian writer that keeps a running CRC-32 of what it wrote.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(size));
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  void value(T v) {
    bytes(&v, sizeof v);
  }
  void string(std::string_view s) {
    value<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void doubles(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }
  /// Appends the CRC of everything written so far (not itself covered).
  void finish() {
    const auto c = static_cast<std::uint32_t>(crc_);
    out_.write(reinterpret_cast<const char*>(&c), sizeof c);
  }
  bool good() const { return out_.good(); }

 private:
  std::ostream& out_;
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) throw IntegrityError(what_ + " is truncated");
    crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(size));
  }
  template <typename T>
    requires std::is_arithmetic_v<T>
  T value() {
    T v{};
    bytes(&v, sizeof v);
    return v;
  }
  std::string string(std::uint64_t max_size = (1ULL << 32)) {
    const auto n = value<std::uint64_t>();
    if (n > max_size) throw IntegrityError(what_ + " has an implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void doubles(std::span<double> v) { bytes(v.data(), v.size_bytes()); }
  void verify_checksum() {
    const auto expected = static_cast<std::uint32_t>(crc_);
    std::uint32_t stored = 0;
    in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (in_.gcount() != sizeof stored) throw IntegrityError(what_ + " is truncated (checksum missing)");
    if (stored != expected) throw IntegrityError(what_ + " failed its checksum");
    if (in_.peek() != std::char_traits<char>::eof()) throw IntegrityError(what_ + " has trailing bytes");
  }

 private:
  std::istream& in_;
  std::string what_;
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

}  // namespace moeids::detail
