#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clbc/canonical.hpp"
#include "clbc/digest.hpp"
#include "clbc/policy.hpp"
#include "clbc/value.hpp"

namespace clbc {

// Claimed semantic content of a turn: which schema intent it instantiates,
// the slot values, and the claimed index into the task's option set.
struct LatentObject {
  std::string intent_id;
  Value slots = Value::map();
  std::int64_t option_index{0};

  Value to_value() const {
    return Value::map({{"intent_id", Value::string(intent_id)},
                       {"option_index", Value::integer(option_index)},
                       {"slots", slots}});
  }

  static LatentObject from_value(const Value& v) {
    LatentObject l;
    l.intent_id = v.at("intent_id").as_string();
    l.option_index = v.at("option_index").as_int();
    l.slots = v.at("slots");
    return l;
  }

  CanonicalBytes canonical() const { return canonicalize(to_value()); }

  friend bool operator==(const LatentObject&, const LatentObject&) = default;
};

struct TimingFields {
  std::int64_t bucket{0};
  std::int64_t window{0};

  friend bool operator==(const TimingFields&, const TimingFields&) = default;
};

struct ToolCall {
  std::string tool_id;
  Value args = Value::map();
  bool arg_order_canonical{true};

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct EnvAction {
  std::string action_id;
  Value params = Value::map();
  std::int64_t order_index{0};

  friend bool operator==(const EnvAction&, const EnvAction&) = default;
};

inline constexpr std::string_view kReceiptMechanismId = "mock_keyed_receipt";

struct ProofReceipt {
  std::string mechanism_id{std::string(kReceiptMechanismId)};
  Digest binding;
  std::string key_epoch;

  friend bool operator==(const ProofReceipt&, const ProofReceipt&) = default;
};

struct Envelope {
  std::string message;
  Value metadata = Value::map();
  std::optional<ToolCall> tool_call;
  TimingFields timing;
  std::vector<EnvAction> env_actions;
  Digest policy_hash;
  Digest input_hash;
  LatentObject latent;
  Digest randomness_commitment;
  Digest prev_digest;
  std::int64_t turn_index{0};
  std::optional<ProofReceipt> proof;

  friend bool operator==(const Envelope&, const Envelope&) = default;

  Value to_value(bool include_proof = true) const {
    Value::Map m;
    {
      Value::Array acts;
      for (const EnvAction& a : env_actions) {
        acts.push_back(Value::map({{"action_id", Value::string(a.action_id)},
                                   {"order_index", Value::integer(a.order_index)},
                                   {"params", a.params}}));
      }
      m.emplace("env_actions", Value::array(std::move(acts)));
    }
    m.emplace("input_hash", Value::string(input_hash.hex()));
    m.emplace("latent", latent.to_value());
    m.emplace("message", Value::string(message));
    m.emplace("metadata", metadata);
    m.emplace("policy_hash", Value::string(policy_hash.hex()));
    m.emplace("prev_digest", Value::string(prev_digest.hex()));
    if (include_proof && proof) {
      m.emplace("proof", Value::map({{"binding", Value::string(proof->binding.hex())},
                                     {"key_epoch", Value::string(proof->key_epoch)},
                                     {"mechanism_id", Value::string(proof->mechanism_id)}}));
    }
    m.emplace("randomness_commitment", Value::string(randomness_commitment.hex()));
    m.emplace("timing", Value::map({{"bucket", Value::integer(timing.bucket)},
                                    {"window", Value::integer(timing.window)}}));
    if (tool_call) {
      m.emplace("tool_call",
                Value::map({{"arg_order_canonical", Value::boolean(tool_call->arg_order_canonical)},
                            {"args", tool_call->args},
                            {"tool_id", Value::string(tool_call->tool_id)}}));
    }
    m.emplace("turn_index", Value::integer(turn_index));
    return Value::map(std::move(m));
  }

  static Envelope from_value(const Value& v) {
    static const std::vector<std::string> known = {
        "env_actions", "input_hash", "latent",  "message",
        "metadata",    "policy_hash", "prev_digest", "proof",
        "randomness_commitment", "timing", "tool_call", "turn_index"};
    for (const auto& [k, item] : v.as_map()) {
      (void)item;
      bool ok = false;
      for (const auto& name : known) ok = ok || name == k;
      if (!ok) throw ParseError("unknown envelope field: " + k);
    }
    Envelope e;
    for (const Value& av : v.at("env_actions").as_array()) {
      EnvAction a;
      a.action_id = av.at("action_id").as_string();
      a.order_index = av.at("order_index").as_int();
      a.params = av.at("params");
      e.env_actions.push_back(std::move(a));
    }
    e.input_hash = Digest::from_hex(v.at("input_hash").as_string());
    e.latent = LatentObject::from_value(v.at("latent"));
    e.message = v.at("message").as_string();
    e.metadata = v.at("metadata");
    e.policy_hash = Digest::from_hex(v.at("policy_hash").as_string());
    e.prev_digest = Digest::from_hex(v.at("prev_digest").as_string());
    if (const Value* pv = v.find("proof")) {
      ProofReceipt r;
      r.binding = Digest::from_hex(pv->at("binding").as_string());
      r.key_epoch = pv->at("key_epoch").as_string();
      r.mechanism_id = pv->at("mechanism_id").as_string();
      e.proof = std::move(r);
    }
    e.randomness_commitment = Digest::from_hex(v.at("randomness_commitment").as_string());
    e.timing = {v.at("timing").at("bucket").as_int(), v.at("timing").at("window").as_int()};
    if (const Value* tv = v.find("tool_call")) {
      ToolCall t;
      t.arg_order_canonical = tv->at("arg_order_canonical").as_bool();
      t.args = tv->at("args");
      t.tool_id = tv->at("tool_id").as_string();
      e.tool_call = std::move(t);
    }
    e.turn_index = v.at("turn_index").as_int();
    return e;
  }

  // Payload = everything except the proof receipt. The chain and the receipt
  // both bind this form, which breaks the circularity of a receipt over
  // bytes that would contain itself.
  CanonicalBytes payload_bytes() const { return canonicalize(to_value(false)); }
  Digest payload_digest() const { return sha256(payload_bytes()); }
  CanonicalBytes wire_bytes() const { return canonicalize(to_value(true)); }
};

struct SchemaVerdict {
  bool ok{true};
  std::string path;    // machine-readable location of the first violation
  std::string detail;

  static SchemaVerdict pass() { return {}; }
  static SchemaVerdict violation(std::string path, std::string detail) {
    return {false, std::move(path), std::move(detail)};
  }
};

namespace detail {
inline std::optional<std::string> check_field_table(const FieldTable& table, const Value& fields,
                                                    std::string& bad_field) {
  if (!fields.is_map()) {
    bad_field.clear();
    return "expected a map";
  }
  for (const auto& [k, item] : fields.as_map()) {
    auto it = table.find(k);
    if (it == table.end()) {
      bad_field = k;
      return "field not declared";
    }
    if (auto err = it->second.check(item)) {
      bad_field = k;
      return err;
    }
  }
  for (const auto& [k, spec] : table) {
    (void)spec;
    if (!fields.find(k)) {
      bad_field = k;
      return "required field missing";
    }
  }
  return std::nullopt;
}
}  // namespace detail

// Surface schema validation (metadata, tool call, timing, env actions).
// Returns the first violation in a stable order; latent-object checks are a
// separate admission clause.
inline SchemaVerdict validate_schema(const Envelope& env, const PolicyDocument& policy) {
  if (!env.metadata.is_map())
    return SchemaVerdict::violation("metadata", "expected a map");
  for (const auto& [k, item] : env.metadata.as_map()) {
    auto it = policy.metadata_allowlist.find(k);
    if (it == policy.metadata_allowlist.end())
      return SchemaVerdict::violation("metadata." + k, "key not in allowlist");
    if (auto err = it->second.check(item))
      return SchemaVerdict::violation("metadata." + k, *err);
  }
  if (env.tool_call) {
    auto it = policy.tool_schemas.find(env.tool_call->tool_id);
    if (it == policy.tool_schemas.end())
      return SchemaVerdict::violation("tool_call.tool_id",
                                      "tool not in allowlist: " + env.tool_call->tool_id);
    std::string bad;
    if (auto err = detail::check_field_table(it->second, env.tool_call->args, bad))
      return SchemaVerdict::violation(bad.empty() ? "tool_call.args" : "tool_call.args." + bad,
                                      *err);
  }
  if (env.timing.bucket < 0 || env.timing.bucket >= policy.timing.buckets)
    return SchemaVerdict::violation("timing.bucket", "bucket out of range");
  if (env.timing.window < 0 || env.timing.window >= policy.timing.windows)
    return SchemaVerdict::violation("timing.window", "window out of range");
  for (std::size_t i = 0; i < env.env_actions.size(); ++i) {
    const EnvAction& a = env.env_actions[i];
    std::string idx = "env_actions[" + std::to_string(i) + "]";
    auto it = policy.env_action_allowlist.find(a.action_id);
    if (it == policy.env_action_allowlist.end())
      return SchemaVerdict::violation(idx + ".action_id", "action not in allowlist");
    std::string bad;
    if (auto err = detail::check_field_table(it->second, a.params, bad))
      return SchemaVerdict::violation(idx + ".params" + (bad.empty() ? "" : "." + bad), *err);
    if (a.order_index != static_cast<std::int64_t>(i))
      return SchemaVerdict::violation(idx + ".order_index", "not a contiguous 0-based sequence");
  }
  return SchemaVerdict::pass();
}

// Digest of the canonicalized public task input; the envelope carries it so
// the verifier and auditors agree on what the turn was answering.
inline Digest bind_input(const Value& allowed_info) { return value_digest(allowed_info); }

// Latent object check against the policy's latent schemas (type-level only;
// option-set membership needs the task and lives with the verifier).
inline SchemaVerdict validate_latent_schema(const LatentObject& latent,
                                            const PolicyDocument& policy) {
  auto it = policy.latent_schemas.find(latent.intent_id);
  if (it == policy.latent_schemas.end())
    return SchemaVerdict::violation("latent.intent_id", "unknown intent: " + latent.intent_id);
  std::string bad;
  if (auto err = detail::check_field_table(it->second, latent.slots, bad))
    return SchemaVerdict::violation("latent.slots" + (bad.empty() ? "" : "." + bad), *err);
  return SchemaVerdict::pass();
}

}  // namespace clbc
