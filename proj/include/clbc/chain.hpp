#pragma once

#include <cstdint>

#include "clbc/bytes.hpp"
#include "clbc/canonical.hpp"
#include "clbc/digest.hpp"
#include "clbc/errors.hpp"

namespace clbc {

// Tamper-evident digest chain over admitted payloads. Genesis predecessor is
// the all-zero digest; each link commits to the previous link, the payload
// digest, and the turn index as an 8-octet big-endian integer.
struct ChainLink {
  Digest prev;
  Digest payload;
  Digest link;
  std::uint64_t turn_index{0};

  friend bool operator==(const ChainLink&, const ChainLink&) = default;
};

inline Digest chain_link_digest(const Digest& prev, const Digest& payload,
                                std::uint64_t turn_index) {
  Bytes buf;
  buf.reserve(72);
  append_digest(buf, prev);
  append_digest(buf, payload);
  append_be64(buf, turn_index);
  return sha256(buf);
}

inline ChainLink extend_chain(const Digest& prev, const CanonicalBytes& payload,
                              std::int64_t turn_index) {
  if (turn_index < 0) throw NegativeTurn("turn index must be non-negative");
  ChainLink l;
  l.prev = prev;
  l.payload = sha256(payload);
  l.turn_index = static_cast<std::uint64_t>(turn_index);
  l.link = chain_link_digest(l.prev, l.payload, l.turn_index);
  return l;
}

}  // namespace clbc
