#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "clbc/errors.hpp"

namespace clbc {

using Bytes = std::vector<std::uint8_t>;

inline void append_bytes(Bytes& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

inline void append_string(Bytes& out, std::string_view s) {
  append_bytes(out, s.data(), s.size());
}

// Unsigned 64-bit, big-endian, 8 octets.
inline void append_be64(Bytes& out, std::uint64_t x) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

inline std::uint64_t read_be64(const std::uint8_t* p) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x = (x << 8) | p[i];
  return x;
}

inline std::string to_hex(const void* p, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  const auto* b = static_cast<const std::uint8_t*>(p);
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[b[i] >> 4]);
    out.push_back(digits[b[i] & 0xf]);
  }
  return out;
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline Bytes from_hex(std::string_view s) {
  if (s.size() % 2 != 0) throw ParseError("hex string with odd length");
  Bytes out;
  out.reserve(s.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) {
    int hi = hex_nibble(s[i]);
    int lo = hex_nibble(s[i + 1]);
    if (hi < 0 || lo < 0) throw ParseError("invalid hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

inline std::string bytes_to_string(const Bytes& b) {
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

inline Bytes string_to_bytes(std::string_view s) {
  Bytes out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

}  // namespace clbc
