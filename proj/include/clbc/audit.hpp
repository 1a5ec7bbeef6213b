#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "clbc/verifier.hpp"

namespace clbc {

// Published once per epoch, before any challenged turn. Packets only verify
// against their own epoch's commitments; comparisons across epochs are
// refused upstream and require re-baselining.
struct AuditEpoch {
  std::string epoch_id;
  Digest policy_hash;
  std::string verifier_version{std::string(kVerifierVersion)};
  std::vector<std::string> allowed_mechanisms{std::string(kReceiptMechanismId)};
  double challenge_rate{0.1};
  Digest schedule_commitment;

  Value to_value() const {
    Value::Array mechs;
    for (const std::string& m : allowed_mechanisms) mechs.push_back(Value::string(m));
    return Value::map(
        {{"allowed_mechanisms", Value::array(std::move(mechs))},
         {"challenge_rate", Value::decimal_from_double(challenge_rate, 4)},
         {"epoch_id", Value::string(epoch_id)},
         {"policy_hash", Value::string(policy_hash.hex())},
         {"schedule_commitment", Value::string(schedule_commitment.hex())},
         {"verifier_version", Value::string(verifier_version)}});
  }

  static AuditEpoch from_value(const Value& v) {
    AuditEpoch e;
    e.allowed_mechanisms.clear();
    for (const Value& m : v.at("allowed_mechanisms").as_array())
      e.allowed_mechanisms.push_back(m.as_string());
    e.challenge_rate = v.at("challenge_rate").as_double();
    e.epoch_id = v.at("epoch_id").as_string();
    e.policy_hash = Digest::from_hex(v.at("policy_hash").as_string());
    e.schedule_commitment = Digest::from_hex(v.at("schedule_commitment").as_string());
    e.verifier_version = v.at("verifier_version").as_string();
    return e;
  }
};

inline AuditEpoch make_epoch(const SeedContext& seed, const Digest& policy_hash,
                             double challenge_rate) {
  AuditEpoch e;
  e.epoch_id = seed.epoch_id;
  e.policy_hash = policy_hash;
  e.challenge_rate = challenge_rate;
  e.schedule_commitment = seed.commitment();
  return e;
}

// m distinct turn indices by seeded Fisher-Yates prefix. The modulo draw is
// part of the pinned procedure so challenger and responder agree exactly.
inline std::vector<std::int64_t> select_challenges(std::int64_t transcript_len,
                                                   std::uint64_t challenge_seed, std::int64_t m) {
  if (transcript_len < 1) throw ConfigError("cannot challenge an empty transcript");
  if (m < 1 || m > transcript_len) throw ConfigError("challenge count out of range");
  std::vector<std::int64_t> indices(static_cast<std::size_t>(transcript_len));
  for (std::int64_t i = 0; i < transcript_len; ++i) indices[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(challenge_seed);
  for (std::int64_t i = 0; i < m; ++i) {
    std::int64_t j = i + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(
                                                             transcript_len - i));
    std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  }
  indices.resize(static_cast<std::size_t>(m));
  return indices;
}

// Everything a challenger needs to re-verify one turn from public
// commitments: no verifier internals are serialized.
struct EvidencePacket {
  std::int64_t turn_index{0};
  Bytes envelope;
  Digest prev_link;
  Digest link;
  std::string proof_mechanism;  // empty when the turn carried no receipt
  std::string recorded_reason;
};

inline EvidencePacket build_packet(const TranscriptState& transcript, std::int64_t index) {
  if (index < 0 || index >= static_cast<std::int64_t>(transcript.admitted.size()))
    throw MissingTurn("challenged turn not in transcript: " + std::to_string(index));
  const LogRecord& rec = transcript.admitted[static_cast<std::size_t>(index)];
  EvidencePacket p;
  p.turn_index = index;
  p.envelope = rec.wire;
  p.prev_link = rec.link.prev;
  p.link = rec.link.link;
  p.recorded_reason = reason_label(rec.verdict.reason);
  try {
    Envelope env = Envelope::from_value(parse_value(rec.wire));
    if (env.proof) p.proof_mechanism = env.proof->mechanism_id;
  } catch (const Error&) {
    // Unparseable stored bytes surface as a chain-continuity failure below.
  }
  return p;
}

// Empty result means the packet verifies; otherwise the failing check name.
inline std::string verify_packet(const EvidencePacket& p, const AuditEpoch& epoch) {
  Envelope env;
  try {
    env = Envelope::from_value(parse_value(p.envelope));
  } catch (const Error&) {
    return "chain-continuity";
  }
  if (env.policy_hash != epoch.policy_hash) return "policy-hash-binding";
  Digest payload = sha256(env.payload_bytes());
  if (chain_link_digest(p.prev_link, payload, static_cast<std::uint64_t>(p.turn_index)) != p.link)
    return "chain-continuity";
  if (!p.proof_mechanism.empty()) {
    bool allowed = false;
    for (const std::string& m : epoch.allowed_mechanisms)
      if (m == p.proof_mechanism) allowed = true;
    if (!allowed) return "proof-type";
  }
  if (p.recorded_reason != "ok") return "reason-code";
  return "";
}

struct AuditFinding {
  std::int64_t turn_index{0};
  std::string failed_check;
};

struct AuditVerdict {
  bool pass{true};
  std::vector<AuditFinding> findings;
};

inline AuditVerdict respond_and_verify(const TranscriptState& transcript,
                                       const std::vector<std::int64_t>& indices,
                                       const AuditEpoch& epoch) {
  AuditVerdict v;
  for (std::int64_t idx : indices) {
    EvidencePacket packet = build_packet(transcript, idx);
    std::string failed = verify_packet(packet, epoch);
    if (!failed.empty()) {
      v.pass = false;
      v.findings.push_back({idx, failed});
    }
  }
  return v;
}

inline double detection_probability(double f, std::int64_t m) {
  if (f < 0.0 || f > 1.0) throw ConfigError("corruption rate must be in [0,1]");
  if (m < 0) throw ConfigError("challenge count must be non-negative");
  return 1.0 - std::pow(1.0 - f, static_cast<double>(m));
}

// Report-layer guard: cross-epoch joins are refused, not merged.
inline void require_same_epoch(const AuditEpoch& a, const AuditEpoch& b) {
  if (a.epoch_id != b.epoch_id || a.policy_hash != b.policy_hash ||
      a.verifier_version != b.verifier_version)
    throw ConfigError("audit epochs differ; comparisons require re-baselining");
}

inline std::string epoch_registry_to_log(const std::vector<AuditEpoch>& epochs) {
  std::string out;
  for (const AuditEpoch& e : epochs) {
    out += serialize_text(e.to_value());
    out += '\n';
  }
  return out;
}

inline std::vector<AuditEpoch> epoch_registry_from_log(const std::string& log) {
  std::vector<AuditEpoch> out;
  std::size_t pos = 0;
  while (pos < log.size()) {
    std::size_t eol = log.find('\n', pos);
    if (eol == std::string::npos) eol = log.size();
    std::string_view line(log.data() + pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    out.push_back(AuditEpoch::from_value(parse_value(line)));
  }
  return out;
}

}  // namespace clbc
