#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clbc/catalog.hpp"
#include "clbc/digest.hpp"
#include "clbc/randomness.hpp"

namespace clbc {

// Where a colluding strategy expresses its signal. Semantic = option choice;
// the rest are surface channels on the emitted record that the gating
// classes progressively close.
enum class SignalChannel { Semantic, MetadataOrder, ToolAlias, Timing };

inline std::string channel_label(SignalChannel c) {
  switch (c) {
    case SignalChannel::Semantic: return "semantic";
    case SignalChannel::MetadataOrder: return "metadata_order";
    case SignalChannel::ToolAlias: return "tool_alias";
    case SignalChannel::Timing: return "timing";
  }
  return "semantic";
}

enum class StrategyFamily { Identity, Modular, Permutation, HashBucket, Affine, XorFold };

inline std::string family_name(StrategyFamily f) {
  switch (f) {
    case StrategyFamily::Identity: return "identity";
    case StrategyFamily::Modular: return "modular";
    case StrategyFamily::Permutation: return "permutation";
    case StrategyFamily::HashBucket: return "hash_bucket";
    case StrategyFamily::Affine: return "affine";
    case StrategyFamily::XorFold: return "xor_fold";
  }
  return "identity";
}

struct AttackStrategy {
  StrategyFamily family{StrategyFamily::Identity};
  std::map<std::string, std::int64_t> params;  // family knobs + "channel"
  double weight{0.0};

  SignalChannel channel() const {
    auto it = params.find("channel");
    if (it == params.end()) return SignalChannel::Semantic;
    switch (it->second) {
      case 1: return SignalChannel::MetadataOrder;
      case 2: return SignalChannel::ToolAlias;
      case 3: return SignalChannel::Timing;
      default: return SignalChannel::Semantic;
    }
  }

  std::int64_t param(const std::string& key, std::int64_t fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  std::string id() const {
    std::string out = family_name(family);
    for (const auto& [k, v] : params) out += "." + k + "=" + std::to_string(v);
    return out;
  }

  // Index map s -> j, total on any domain size via final mod reduction.
  // Out-of-range outputs clamp rather than error: an attacker that throws is
  // an attacker that gets rejected, and we want its best admissible effort.
  std::uint64_t transform(std::int64_t s, const PublicRandomness& rand,
                          std::uint64_t domain) const {
    if (domain == 0) throw ZeroOptions("transform over empty domain");
    std::uint64_t u = static_cast<std::uint64_t>(s < 0 ? -s : s);
    std::uint64_t j = u;
    switch (family) {
      case StrategyFamily::Identity:
        j = u;
        break;
      case StrategyFamily::Modular: {
        std::uint64_t base = static_cast<std::uint64_t>(std::max<std::int64_t>(param("base", 2), 1));
        std::uint64_t shift = static_cast<std::uint64_t>(std::max<std::int64_t>(param("shift", 0), 0));
        j = (u >> shift) % base;
        break;
      }
      case StrategyFamily::Permutation: {
        // Seeded permutation over a fixed working domain, then reduced.
        std::uint64_t span = static_cast<std::uint64_t>(std::max<std::int64_t>(param("span", 16), 2));
        std::vector<std::uint64_t> perm(span);
        for (std::uint64_t i = 0; i < span; ++i) perm[i] = i;
        std::uint64_t st = static_cast<std::uint64_t>(param("perm_seed", 1));
        for (std::uint64_t i = span - 1; i > 0; --i) {
          st = st * 6364136223846793005ULL + 1442695040888963407ULL;
          std::uint64_t k = st % (i + 1);
          std::swap(perm[i], perm[k]);
        }
        j = perm[u % span];
        break;
      }
      case StrategyFamily::HashBucket: {
        Bytes buf;
        append_be64(buf, u);
        append_be64(buf, static_cast<std::uint64_t>(param("nonce", 0)));
        j = leading_u64(sha256(buf));
        break;
      }
      case StrategyFamily::Affine: {
        std::uint64_t a = static_cast<std::uint64_t>(param("a", 1));
        std::uint64_t b = static_cast<std::uint64_t>(param("b", 0));
        j = a * u + b;
        break;
      }
      case StrategyFamily::XorFold: {
        std::uint64_t mask = static_cast<std::uint64_t>(param("mask", 1));
        j = u ^ (leading_u64(rand.value) & mask);
        break;
      }
    }
    return j % domain;
  }
};

// Colluding option selection: the transform sees only (s, public randomness,
// option count), never the utility table, and its output is clamped into the
// option set so the choice is always admissible at the set-membership level.
inline const LatentObject& encode_colluding(const TaskInstance& task,
                                            const PublicRandomness& rand, const HiddenState& s,
                                            const AttackStrategy& strategy) {
  if (task.options.empty()) throw ZeroOptions("task has no options: " + task.task_id);
  std::uint64_t j = strategy.transform(s.value, rand, task.options.size());
  return task.options[static_cast<std::size_t>(j)];
}

}  // namespace clbc
