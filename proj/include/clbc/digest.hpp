#pragma once

#include <openssl/evp.h>

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "clbc/bytes.hpp"
#include "clbc/errors.hpp"

namespace clbc {

// The one pinned 256-bit hash. Everything downstream treats it as opaque, so
// it can be swapped per audit epoch without touching protocol logic.
inline constexpr std::string_view kDigestAlgorithmId = "clbc-d-1";

struct Digest {
  std::array<std::uint8_t, 32> v{};

  auto operator<=>(const Digest&) const = default;

  std::string hex() const { return to_hex(v.data(), v.size()); }

  static Digest from_hex(std::string_view s) {
    Bytes raw = clbc::from_hex(s);
    if (raw.size() != 32) throw ParseError("digest hex must decode to 32 octets");
    Digest d;
    std::copy(raw.begin(), raw.end(), d.v.begin());
    return d;
  }

  bool is_zero() const {
    for (auto b : v)
      if (b != 0) return false;
    return true;
  }
};

inline Digest zero_digest() { return Digest{}; }

inline Digest sha256(const void* data, std::size_t len) {
  Digest out;
  unsigned int written = 0;
  if (EVP_Digest(data, len, out.v.data(), &written, EVP_sha256(), nullptr) != 1 ||
      written != 32) {
    throw Error("sha256 backend failure");
  }
  return out;
}

inline Digest sha256(const Bytes& b) { return sha256(b.data(), b.size()); }
inline Digest sha256(std::string_view s) { return sha256(s.data(), s.size()); }

inline void append_digest(Bytes& out, const Digest& d) {
  append_bytes(out, d.v.data(), d.v.size());
}

// HMAC over the pinned hash (classic ipad/opad construction; key <= block size
// is the only case we use, longer keys are pre-hashed as usual).
inline Digest hmac(const Bytes& key, const Bytes& message) {
  constexpr std::size_t kBlock = 64;
  std::array<std::uint8_t, kBlock> k{};
  if (key.size() > kBlock) {
    Digest kd = sha256(key);
    std::copy(kd.v.begin(), kd.v.end(), k.begin());
  } else {
    std::copy(key.begin(), key.end(), k.begin());
  }
  Bytes inner;
  inner.reserve(kBlock + message.size());
  for (std::size_t i = 0; i < kBlock; ++i) inner.push_back(k[i] ^ 0x36);
  append_bytes(inner, message.data(), message.size());
  Digest ih = sha256(inner);

  Bytes outer;
  outer.reserve(kBlock + 32);
  for (std::size_t i = 0; i < kBlock; ++i) outer.push_back(k[i] ^ 0x5c);
  append_digest(outer, ih);
  return sha256(outer);
}

// First 8 octets interpreted as an unsigned big-endian integer. Shared by the
// tie-break rule and every place that needs a small deterministic integer out
// of a digest.
inline std::uint64_t leading_u64(const Digest& d) { return read_be64(d.v.data()); }

}  // namespace clbc
