#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clbc/catalog.hpp"
#include "clbc/chain.hpp"
#include "clbc/envelope.hpp"
#include "clbc/policy.hpp"
#include "clbc/randomness.hpp"

namespace clbc {

inline constexpr std::string_view kVerifierVersion = "clbc-verifier-1";

// Stable reason-code vocabulary. Spellings are frozen; dashboards and the
// rejection ledger key off them.
enum class ReasonCode { Ok, Schema, Chain, Policy, Seed, Latent, Canonicalization, Proof };

inline std::string reason_label(ReasonCode r) {
  switch (r) {
    case ReasonCode::Ok: return "ok";
    case ReasonCode::Schema: return "schema";
    case ReasonCode::Chain: return "chain";
    case ReasonCode::Policy: return "policy";
    case ReasonCode::Seed: return "seed";
    case ReasonCode::Latent: return "latent";
    case ReasonCode::Canonicalization: return "canonicalization";
    case ReasonCode::Proof: return "proof";
  }
  return "ok";
}

inline ReasonCode reason_from_label(const std::string& s) {
  for (ReasonCode r : {ReasonCode::Ok, ReasonCode::Schema, ReasonCode::Chain, ReasonCode::Policy,
                       ReasonCode::Seed, ReasonCode::Latent, ReasonCode::Canonicalization,
                       ReasonCode::Proof}) {
    if (reason_label(r) == s) return r;
  }
  throw ParseError("unknown reason code: " + s);
}

struct AdmissionVerdict {
  bool admitted{false};
  ReasonCode reason{ReasonCode::Ok};
  std::string detail;
  std::int64_t turn_index{0};

  static AdmissionVerdict admit(std::int64_t turn) {
    return {true, ReasonCode::Ok, "", turn};
  }
  static AdmissionVerdict reject(ReasonCode r, std::string detail, std::int64_t turn) {
    return {false, r, std::move(detail), turn};
  }
};

struct ProofSettings {
  enum class Mode { Strict, Sampled };
  Mode mode{Mode::Strict};
  std::int64_t cadence{1};
  bool require_receipt{true};

  static ProofSettings strict() { return {Mode::Strict, 1, true}; }
  static ProofSettings sampled(std::int64_t cadence) {
    if (cadence < 1) throw ConfigError("sampling cadence must be >= 1");
    return {Mode::Sampled, cadence, true};
  }
};

// Strict mode proves every turn regardless of the cadence field.
inline bool must_prove(const ProofSettings& s, std::int64_t turn_index) {
  if (s.mode == ProofSettings::Mode::Strict) return true;
  return turn_index % s.cadence == 0;
}

struct AdmissionProfile {
  bool enforce_tie_break{true};     // latent must equal the honest selection
  bool enforce_render_match{true};  // fields must equal the faithful render

  static AdmissionProfile honest_enforcing() { return {true, true}; }
  static AdmissionProfile permissive() { return {false, false}; }
};

// The predicate factors into named clauses; gating baselines run subsets.
enum class Clause : std::uint8_t {
  Canonicalization = 1 << 0,
  Schema = 1 << 1,
  Policy = 1 << 2,
  Seed = 1 << 3,
  Chain = 1 << 4,
  Latent = 1 << 5,
  Proof = 1 << 6,
};

struct ClauseSet {
  std::uint8_t bits{0};

  static ClauseSet all() { return {0x7f}; }
  static ClauseSet none() { return {0}; }
  static ClauseSet of(std::initializer_list<Clause> cs) {
    ClauseSet s;
    for (Clause c : cs) s.bits |= static_cast<std::uint8_t>(c);
    return s;
  }
  bool has(Clause c) const { return bits & static_cast<std::uint8_t>(c); }
};

struct PredicateContext {
  Digest expected_policy_hash;
  Digest prev_digest;
  std::int64_t expected_turn{0};
  SeedContext seed_context;
  ProofSettings proof_settings;
  AdmissionProfile profile;
  ClauseSet clauses = ClauseSet::all();
  Bytes receipt_key;
  std::string epoch_id;
  const TaskInstance* task{nullptr};
  const std::set<Digest>* seen_payloads{nullptr};
};

// ~~~~~ receipts ~~~~~

inline Digest receipt_binding(const Digest& policy_hash, const Digest& input_hash,
                              const CanonicalBytes& latent_bytes, const Digest& payload_digest,
                              const Digest& rand_value, const Bytes& key) {
  Bytes msg;
  append_digest(msg, policy_hash);
  append_digest(msg, input_hash);
  append_bytes(msg, latent_bytes.data(), latent_bytes.size());
  append_digest(msg, payload_digest);
  append_digest(msg, rand_value);
  return hmac(key, msg);
}

inline ProofReceipt make_receipt(const Envelope& env, const Digest& rand_value, const Bytes& key,
                                 const std::string& key_epoch) {
  ProofReceipt r;
  r.key_epoch = key_epoch;
  r.binding = receipt_binding(env.policy_hash, env.input_hash, env.latent.canonical(),
                              env.payload_digest(), rand_value, key);
  return r;
}

inline bool verify_receipt(const ProofReceipt& receipt, const Envelope& env,
                           const Digest& rand_value, const Bytes& key,
                           const std::string& key_epoch) {
  if (receipt.mechanism_id != kReceiptMechanismId) return false;
  if (receipt.key_epoch != key_epoch) return false;
  return receipt.binding == receipt_binding(env.policy_hash, env.input_hash,
                                            env.latent.canonical(), env.payload_digest(),
                                            rand_value, key);
}

// ~~~~~ candidates ~~~~~

// A candidate arrives as bytes; the structured view is derived from them so
// byte-level games (ordering, spacing, spelling) stay visible to the
// canonicalization clause.
struct CandidateEnvelope {
  Bytes wire;
  Envelope env;

  static CandidateEnvelope from_envelope(const Envelope& e) {
    return {e.wire_bytes(), e};
  }
  static CandidateEnvelope from_bytes(Bytes bytes) {
    Envelope e = Envelope::from_value(parse_value(bytes));
    return {std::move(bytes), std::move(e)};
  }
};

// ~~~~~ admission ~~~~~

// Simple variant: canonical form, then surface schema, then chain position.
inline AdmissionVerdict admit_simple(const CandidateEnvelope& cand, const PredicateContext& ctx,
                                     const PolicyDocument& policy) {
  const Envelope& env = cand.env;
  if (!is_canonical(cand.wire))
    return AdmissionVerdict::reject(ReasonCode::Canonicalization, "wire bytes not canonical",
                                    ctx.expected_turn);
  if (cand.wire != env.wire_bytes())
    return AdmissionVerdict::reject(ReasonCode::Canonicalization, "wire bytes not canonical",
                                    ctx.expected_turn);
  SchemaVerdict sv = validate_schema(env, policy);
  if (!sv.ok)
    return AdmissionVerdict::reject(ReasonCode::Schema, sv.path + ": " + sv.detail,
                                    ctx.expected_turn);
  if (env.prev_digest != ctx.prev_digest)
    return AdmissionVerdict::reject(ReasonCode::Chain, "prev digest mismatch", ctx.expected_turn);
  if (env.turn_index != ctx.expected_turn)
    return AdmissionVerdict::reject(ReasonCode::Chain, "turn index mismatch", ctx.expected_turn);
  return AdmissionVerdict::admit(ctx.expected_turn);
}

// Full predicate. Canonical-form and schema checks run first (they are the
// parse step that makes the rest meaningful), then the clause cascade in
// fixed order: policy, seed, chain, latent, field canonicality, proof. First
// failing clause names the verdict.
inline AdmissionVerdict admit_full(const CandidateEnvelope& cand, const PredicateContext& ctx,
                                   const PolicyDocument& policy) {
  const Envelope& env = cand.env;
  const std::int64_t turn = ctx.expected_turn;

  if (ctx.clauses.has(Clause::Canonicalization)) {
    if (!is_canonical(cand.wire) || cand.wire != env.wire_bytes())
      return AdmissionVerdict::reject(ReasonCode::Canonicalization, "wire bytes not canonical",
                                      turn);
  }
  if (ctx.clauses.has(Clause::Schema)) {
    SchemaVerdict sv = validate_schema(env, policy);
    if (!sv.ok)
      return AdmissionVerdict::reject(ReasonCode::Schema, sv.path + ": " + sv.detail, turn);
  }
  if (ctx.clauses.has(Clause::Policy)) {
    if (env.policy_hash != ctx.expected_policy_hash)
      return AdmissionVerdict::reject(ReasonCode::Policy, "policy hash mismatch", turn);
  }
  if (ctx.clauses.has(Clause::Seed)) {
    // The commitment must match the randomness derived at the envelope's own
    // claimed chain coordinates; a stale record stays internally consistent
    // here and is caught by the chain clause instead.
    PublicRandomness r = derive_randomness(ctx.seed_context, env.prev_digest, env.turn_index);
    if (env.randomness_commitment != sha256(r.value.v.data(), r.value.v.size()))
      return AdmissionVerdict::reject(ReasonCode::Seed, "randomness commitment mismatch", turn);
  }
  if (ctx.clauses.has(Clause::Chain)) {
    if (env.prev_digest != ctx.prev_digest)
      return AdmissionVerdict::reject(ReasonCode::Chain, "prev digest mismatch", turn);
    if (env.turn_index != turn)
      return AdmissionVerdict::reject(ReasonCode::Chain, "turn index mismatch", turn);
    if (ctx.seen_payloads && ctx.seen_payloads->count(env.payload_digest()))
      return AdmissionVerdict::reject(ReasonCode::Chain, "replayed payload digest", turn);
  }

  PublicRandomness turn_rand = derive_randomness(ctx.seed_context, ctx.prev_digest, turn);

  if (ctx.clauses.has(Clause::Latent)) {
    SchemaVerdict lv = validate_latent_schema(env.latent, policy);
    if (!lv.ok)
      return AdmissionVerdict::reject(ReasonCode::Latent, lv.path + ": " + lv.detail, turn);
    if (ctx.task) {
      std::int64_t idx = env.latent.option_index;
      if (idx < 0 || idx >= static_cast<std::int64_t>(ctx.task->options.size()))
        return AdmissionVerdict::reject(ReasonCode::Latent, "option index out of range", turn);
      if (!(ctx.task->options[static_cast<std::size_t>(idx)] == env.latent))
        return AdmissionVerdict::reject(ReasonCode::Latent, "latent not in task option set", turn);
      if (ctx.profile.enforce_tie_break) {
        const LatentObject& honest = encode_honest(*ctx.task, turn_rand);
        if (!(honest == env.latent))
          return AdmissionVerdict::reject(ReasonCode::Latent,
                                          "latent differs from tie-break selection", turn);
      }
    }
  }
  if (ctx.clauses.has(Clause::Canonicalization)) {
    if (env.tool_call && !env.tool_call->arg_order_canonical)
      return AdmissionVerdict::reject(ReasonCode::Canonicalization,
                                      "tool arg order witness not canonical", turn);
    if (ctx.profile.enforce_render_match) {
      RenderedParts parts = render(env.latent, turn_rand);
      bool match = parts.message == env.message && parts.metadata == env.metadata &&
                   parts.timing == env.timing && parts.env_actions == env.env_actions;
      if (match) {
        if (parts.tool_call.has_value() != env.tool_call.has_value())
          match = false;
        else if (parts.tool_call &&
                 !(parts.tool_call->tool_id == env.tool_call->tool_id &&
                   parts.tool_call->args == env.tool_call->args))
          match = false;
      }
      if (!match)
        return AdmissionVerdict::reject(ReasonCode::Canonicalization,
                                        "fields differ from canonical rendering", turn);
    }
  }
  if (ctx.clauses.has(Clause::Proof) && ctx.proof_settings.require_receipt) {
    bool required = must_prove(ctx.proof_settings, turn);
    if (required && !env.proof)
      return AdmissionVerdict::reject(ReasonCode::Proof, "missing receipt on proved turn", turn);
    if (env.proof) {
      if (!verify_receipt(*env.proof, env, turn_rand.value, ctx.receipt_key, ctx.epoch_id))
        return AdmissionVerdict::reject(ReasonCode::Proof, "receipt does not verify", turn);
    }
  }
  return AdmissionVerdict::admit(turn);
}

// ~~~~~ transcript ~~~~~

struct LogRecord {
  Bytes wire;
  AdmissionVerdict verdict;
  ChainLink link;
};

struct RejectionRecord {
  Digest payload;
  ReasonCode reason{ReasonCode::Schema};
  std::int64_t turn{0};
  std::string detail;
};

struct TranscriptState {
  Digest head;  // zero at genesis
  std::int64_t turn_count{0};
  std::vector<LogRecord> admitted;
  std::vector<RejectionRecord> rejected;
  std::set<Digest> seen_payloads;
};

// Lane-wide admission settings shared across turns.
struct AdmissionEnv {
  Digest policy_hash;
  SeedContext seed;
  Bytes receipt_key;
  std::string epoch_id;
  ProofSettings proof_settings;
  AdmissionProfile profile;
  ClauseSet clauses = ClauseSet::all();
  bool admit_all{false};       // bypass gating entirely (raw)
  bool log_verdicts{false};    // evaluate + record, admit regardless (audit-only)
};

inline PredicateContext make_context(const TranscriptState& state, const AdmissionEnv& lane,
                                     const TaskInstance* task) {
  PredicateContext ctx;
  ctx.expected_policy_hash = lane.policy_hash;
  ctx.prev_digest = state.head;
  ctx.expected_turn = state.turn_count;
  ctx.seed_context = lane.seed;
  ctx.proof_settings = lane.proof_settings;
  ctx.profile = lane.profile;
  ctx.clauses = lane.clauses;
  ctx.receipt_key = lane.receipt_key;
  ctx.epoch_id = lane.epoch_id;
  ctx.task = task;
  ctx.seen_payloads = &state.seen_payloads;
  return ctx;
}

// One sequencing point for candidate turns: admitted records extend the
// chain and advance the turn counter, rejections go to the ledger and leave
// chain state untouched (no bypass path).
inline AdmissionVerdict apply_admission(TranscriptState& state, const CandidateEnvelope& cand,
                                        const AdmissionEnv& lane, const PolicyDocument& policy,
                                        const TaskInstance* task) {
  AdmissionVerdict verdict;
  if (lane.admit_all && !lane.log_verdicts) {
    verdict = AdmissionVerdict::admit(state.turn_count);
  } else {
    verdict = admit_full(cand, make_context(state, lane, task), policy);
    if (lane.log_verdicts) {
      verdict.admitted = true;  // audit-only: record the verdict, admit anyway
    }
  }
  if (!verdict.admitted) {
    state.rejected.push_back(
        {cand.env.payload_digest(), verdict.reason, state.turn_count, verdict.detail});
    return verdict;
  }
  CanonicalBytes payload = cand.env.payload_bytes();
  ChainLink link = extend_chain(state.head, payload, state.turn_count);
  state.seen_payloads.insert(link.payload);
  state.admitted.push_back({cand.wire, verdict, link});
  state.head = link.link;
  ++state.turn_count;
  return verdict;
}

// Append-only transcript log: one record per line. Replayable.
inline std::string transcript_to_log(const TranscriptState& state) {
  std::string out;
  for (const LogRecord& rec : state.admitted) {
    Value row = Value::map(
        {{"envelope", Value::string(to_hex(rec.wire))},
         {"link", Value::map({{"link", Value::string(rec.link.link.hex())},
                              {"payload", Value::string(rec.link.payload.hex())},
                              {"prev", Value::string(rec.link.prev.hex())},
                              {"turn_index",
                               Value::integer(static_cast<std::int64_t>(rec.link.turn_index))}})},
         {"verdict", Value::map({{"reason", Value::string(reason_label(rec.verdict.reason))},
                                 {"turn_index", Value::integer(rec.verdict.turn_index)}})}});
    out += serialize_text(row);
    out += '\n';
  }
  return out;
}

inline std::string rejections_to_log(const TranscriptState& state) {
  std::string out;
  for (const RejectionRecord& rec : state.rejected) {
    Value row = Value::map({{"detail", Value::string(rec.detail)},
                            {"payload_digest", Value::string(rec.payload.hex())},
                            {"reason", Value::string(reason_label(rec.reason))},
                            {"turn", Value::integer(rec.turn)}});
    out += serialize_text(row);
    out += '\n';
  }
  return out;
}

inline TranscriptState transcript_from_log(const std::string& log) {
  TranscriptState state;
  std::size_t pos = 0;
  while (pos < log.size()) {
    std::size_t eol = log.find('\n', pos);
    if (eol == std::string::npos) eol = log.size();
    std::string_view line(log.data() + pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    Value row = parse_value(line);
    LogRecord rec;
    rec.wire = from_hex(row.at("envelope").as_string());
    rec.link.link = Digest::from_hex(row.at("link").at("link").as_string());
    rec.link.payload = Digest::from_hex(row.at("link").at("payload").as_string());
    rec.link.prev = Digest::from_hex(row.at("link").at("prev").as_string());
    rec.link.turn_index = static_cast<std::uint64_t>(row.at("link").at("turn_index").as_int());
    rec.verdict.admitted = true;
    rec.verdict.reason = reason_from_label(row.at("verdict").at("reason").as_string());
    rec.verdict.turn_index = row.at("verdict").at("turn_index").as_int();
    state.seen_payloads.insert(rec.link.payload);
    state.head = rec.link.link;
    state.admitted.push_back(std::move(rec));
    ++state.turn_count;
  }
  return state;
}

// Full replay: every stored link must recompute from its predecessor and the
// stored envelope bytes, ending at the stored head.
inline bool verify_transcript(const TranscriptState& state) {
  Digest head = zero_digest();
  for (std::size_t i = 0; i < state.admitted.size(); ++i) {
    const LogRecord& rec = state.admitted[i];
    Envelope env;
    try {
      env = Envelope::from_value(parse_value(rec.wire));
    } catch (const Error&) {
      return false;
    }
    Digest payload = sha256(env.payload_bytes());
    if (rec.link.prev != head) return false;
    if (rec.link.payload != payload) return false;
    if (rec.link.turn_index != i) return false;
    if (chain_link_digest(head, payload, i) != rec.link.link) return false;
    head = rec.link.link;
  }
  return head == state.head;
}

}  // namespace clbc
