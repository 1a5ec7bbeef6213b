#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "clbc/bytes.hpp"
#include "clbc/digest.hpp"
#include "clbc/errors.hpp"

namespace clbc {

// Per-epoch schedule seed. Only its digest is published; the seed itself
// stays with the party that committed to it until audit time.
struct SeedContext {
  std::array<std::uint8_t, 32> schedule_seed{};
  std::string epoch_id;

  Digest commitment() const { return sha256(schedule_seed.data(), schedule_seed.size()); }

  static SeedContext from_bytes(const Bytes& seed, std::string epoch_id) {
    if (seed.size() != 32) throw ParseError("schedule seed must be 32 octets");
    SeedContext ctx;
    std::copy(seed.begin(), seed.end(), ctx.schedule_seed.begin());
    ctx.epoch_id = std::move(epoch_id);
    return ctx;
  }
};

// Public per-turn randomness. Binds to the transcript head so it cannot be
// rerolled without forking the chain: value = H(seed || prev || turn), with
// the turn index as 8 big-endian octets.
struct PublicRandomness {
  Digest value;
  std::uint64_t turn_index{0};
  Digest chain_binding;  // the prev digest folded in, kept as a witness
};

inline PublicRandomness derive_randomness(const SeedContext& ctx, const Digest& prev_digest,
                                          std::int64_t turn_index) {
  if (turn_index < 0) throw NegativeTurn("turn index must be non-negative");
  Bytes buf;
  buf.reserve(72);
  append_bytes(buf, ctx.schedule_seed.data(), ctx.schedule_seed.size());
  append_digest(buf, prev_digest);
  append_be64(buf, static_cast<std::uint64_t>(turn_index));
  PublicRandomness r;
  r.value = sha256(buf);
  r.turn_index = static_cast<std::uint64_t>(turn_index);
  r.chain_binding = prev_digest;
  return r;
}

// Deterministic tie-break rule: leading 8 octets of the randomness value as a
// big-endian integer, reduced mod the option count.
inline constexpr std::string_view kTieBreakRuleId = "first8-be-mod";

inline std::uint64_t tie_break(const PublicRandomness& rand, std::uint64_t option_count) {
  if (option_count == 0) throw ZeroOptions("tie-break over an empty option set");
  return leading_u64(rand.value) % option_count;
}

}  // namespace clbc
