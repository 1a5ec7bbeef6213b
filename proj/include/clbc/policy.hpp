#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clbc/canonical.hpp"
#include "clbc/digest.hpp"
#include "clbc/randomness.hpp"
#include "clbc/value.hpp"

namespace clbc {

// Typed constraint on a single scalar field. Empty allowed-set means any
// value of the right type; decimals carry a max precision and anything finer
// is rejected outright, never rounded.
struct FieldSpec {
  enum class Type { String, Int, Bool, Decimal };

  Type type{Type::String};
  std::vector<Value> allowed;
  std::optional<std::int64_t> min_value;
  std::optional<std::int64_t> max_value;
  std::optional<std::uint32_t> max_scale;

  static FieldSpec string_any() { return {Type::String, {}, {}, {}, {}}; }

  static FieldSpec string_enum(std::vector<std::string> values) {
    FieldSpec f{Type::String, {}, {}, {}, {}};
    for (auto& v : values) f.allowed.push_back(Value::string(std::move(v)));
    return f;
  }

  static FieldSpec int_range(std::int64_t lo, std::int64_t hi) {
    return {Type::Int, {}, lo, hi, {}};
  }

  static FieldSpec boolean() { return {Type::Bool, {}, {}, {}, {}}; }

  static FieldSpec decimal_prec(std::uint32_t scale) {
    return {Type::Decimal, {}, {}, {}, scale};
  }

  // nullopt = ok, otherwise a short violation description
  std::optional<std::string> check(const Value& v) const {
    switch (type) {
      case Type::String:
        if (!v.is_string()) return "expected string";
        break;
      case Type::Bool:
        if (!v.is_bool()) return "expected bool";
        break;
      case Type::Int:
        if (!v.is_int()) return "expected integer";
        if (min_value && v.as_int() < *min_value) return "below minimum";
        if (max_value && v.as_int() > *max_value) return "above maximum";
        break;
      case Type::Decimal:
        if (!v.is_number()) return "expected decimal";
        if (v.is_decimal() && max_scale && v.as_decimal().scale > *max_scale)
          return "precision beyond declared scale";
        break;
    }
    if (!allowed.empty()) {
      for (const Value& a : allowed)
        if (a == v) return std::nullopt;
      return "value not in allowlist";
    }
    return std::nullopt;
  }

  Value to_value() const {
    Value::Map m;
    const char* t = type == Type::String    ? "string"
                    : type == Type::Int     ? "int"
                    : type == Type::Bool    ? "bool"
                                            : "decimal";
    m.emplace("type", Value::string(t));
    if (!allowed.empty()) m.emplace("values", Value::array({allowed.begin(), allowed.end()}));
    if (min_value) m.emplace("min", Value::integer(*min_value));
    if (max_value) m.emplace("max", Value::integer(*max_value));
    if (max_scale) m.emplace("max_scale", Value::integer(*max_scale));
    return Value::map(std::move(m));
  }

  static FieldSpec from_value(const Value& v) {
    FieldSpec f;
    const std::string& t = v.at("type").as_string();
    f.type = t == "string"    ? Type::String
             : t == "int"     ? Type::Int
             : t == "bool"    ? Type::Bool
             : t == "decimal" ? Type::Decimal
                              : throw ParseError("unknown field type: " + t);
    if (const Value* a = v.find("values")) f.allowed = a->as_array();
    if (const Value* m = v.find("min")) f.min_value = m->as_int();
    if (const Value* m = v.find("max")) f.max_value = m->as_int();
    if (const Value* m = v.find("max_scale"))
      f.max_scale = static_cast<std::uint32_t>(m->as_int());
    return f;
  }
};

using FieldTable = std::map<std::string, FieldSpec>;

inline Value field_table_to_value(const FieldTable& t) {
  Value::Map m;
  for (const auto& [k, spec] : t) m.emplace(k, spec.to_value());
  return Value::map(std::move(m));
}

inline FieldTable field_table_from_value(const Value& v) {
  FieldTable t;
  for (const auto& [k, spec] : v.as_map()) t.emplace(k, FieldSpec::from_value(spec));
  return t;
}

struct TimingBuckets {
  std::int64_t buckets{1};
  std::int64_t windows{1};
};

// Declared per-turn side-channel allowances, in bits.
struct ResidualBudgets {
  double time{0.0};
  double tool{0.0};
  double token{0.0};
  double env{0.0};

  double per_turn_total() const { return time + tool + token + env; }
};

struct PolicyDocument {
  std::string version{"desk-1"};
  FieldTable metadata_allowlist;
  std::map<std::string, FieldTable> tool_schemas;
  std::map<std::string, FieldTable> env_action_allowlist;
  TimingBuckets timing;
  std::string latent_schema_id{"desk-latents-1"};
  std::map<std::string, FieldTable> latent_schemas;
  std::string tie_break_rule_id{std::string(kTieBreakRuleId)};
  ResidualBudgets residual_budgets;

  Value to_value() const {
    auto nested = [](const std::map<std::string, FieldTable>& outer) {
      Value::Map m;
      for (const auto& [k, t] : outer) m.emplace(k, field_table_to_value(t));
      return Value::map(std::move(m));
    };
    Value::Map m;
    m.emplace("encoding_id", Value::string(std::string(kEncodingId)));
    m.emplace("env_action_allowlist", nested(env_action_allowlist));
    m.emplace("latent_schema_id", Value::string(latent_schema_id));
    m.emplace("latent_schemas", nested(latent_schemas));
    m.emplace("metadata_allowlist", field_table_to_value(metadata_allowlist));
    m.emplace("residual_budgets",
              Value::map({{"env", Value::decimal_from_double(residual_budgets.env, 4)},
                          {"time", Value::decimal_from_double(residual_budgets.time, 4)},
                          {"token", Value::decimal_from_double(residual_budgets.token, 4)},
                          {"tool", Value::decimal_from_double(residual_budgets.tool, 4)}}));
    m.emplace("tie_break_rule_id", Value::string(tie_break_rule_id));
    m.emplace("timing_buckets", Value::map({{"buckets", Value::integer(timing.buckets)},
                                            {"windows", Value::integer(timing.windows)}}));
    m.emplace("tool_schemas", nested(tool_schemas));
    m.emplace("version", Value::string(version));
    return Value::map(std::move(m));
  }

  static PolicyDocument from_value(const Value& v) {
    auto nested = [](const Value& outer) {
      std::map<std::string, FieldTable> m;
      for (const auto& [k, t] : outer.as_map()) m.emplace(k, field_table_from_value(t));
      return m;
    };
    PolicyDocument p;
    if (v.at("encoding_id").as_string() != kEncodingId)
      throw ParseError("policy document uses an unknown encoding id");
    p.env_action_allowlist = nested(v.at("env_action_allowlist"));
    p.latent_schema_id = v.at("latent_schema_id").as_string();
    p.latent_schemas = nested(v.at("latent_schemas"));
    p.metadata_allowlist = field_table_from_value(v.at("metadata_allowlist"));
    const Value& rb = v.at("residual_budgets");
    p.residual_budgets = {rb.at("time").as_double(), rb.at("tool").as_double(),
                          rb.at("token").as_double(), rb.at("env").as_double()};
    p.tie_break_rule_id = v.at("tie_break_rule_id").as_string();
    p.timing = {v.at("timing_buckets").at("buckets").as_int(),
                v.at("timing_buckets").at("windows").as_int()};
    p.tool_schemas = nested(v.at("tool_schemas"));
    p.version = v.at("version").as_string();
    return p;
  }

  Digest hash() const { return value_digest(to_value()); }
};

// Desk-scale default policy. Single timing bucket, so the timing surface is
// closed by schema alone; the timing-channel variant below opens it with a
// matching declared budget.
inline PolicyDocument default_policy() {
  PolicyDocument p;
  p.metadata_allowlist = {
      {"action",
       FieldSpec::string_enum({"invoke", "offer", "plan", "report", "select", "summarize"})},
      {"priority", FieldSpec::string_enum({"high", "low", "medium"})},
      {"status", FieldSpec::string_enum({"blocked", "ok", "revise"})},
  };
  p.tool_schemas = {
      {"report",
       {{"channel", FieldSpec::string_enum({"board", "inbox"})},
        {"level", FieldSpec::int_range(0, 3)}}},
      {"lookup",
       {{"key", FieldSpec::string_any()}, {"limit", FieldSpec::int_range(1, 10)}}},
  };
  p.env_action_allowlist = {
      {"queue_job", {{"slot", FieldSpec::int_range(0, 7)}}},
      {"set_flag", {{"name", FieldSpec::string_enum({"done", "hold"})}}},
  };
  p.timing = {1, 1};
  p.latent_schemas = {
      {"report_status",
       {{"priority", FieldSpec::string_enum({"high", "low", "medium"})},
        {"status", FieldSpec::string_enum({"blocked", "ok", "revise"})}}},
      {"pick_plan",
       {{"focus",
         FieldSpec::string_enum({"breadth", "clarity", "cost", "depth", "margin", "quality",
                                 "reach", "reuse", "risk", "safety", "scope", "speed", "tempo",
                                 "time", "volume", "yield"})},
        {"plan_id", FieldSpec::int_range(0, 31)}}},
      {"summarize_doc",
       {{"angle",
         FieldSpec::string_enum(
             {"actors", "causes", "costs", "impact", "options", "risks", "scope", "timeline"})},
        {"doc_id", FieldSpec::int_range(0, 99)}}},
      {"counter_offer",
       {{"amount", FieldSpec::decimal_prec(2)},
        {"urgency", FieldSpec::string_enum({"high", "low", "medium"})}}},
      {"invoke_tool",
       {{"channel", FieldSpec::string_enum({"board", "inbox"})},
        {"level", FieldSpec::int_range(0, 3)},
        {"tool", FieldSpec::string_enum({"lookup", "report"})}}},
      {"teps_step",
       {{"mode",
         FieldSpec::string_enum({"active", "fallback", "paused", "primary", "retry", "standby",
                                 "sync", "verify"})},
        {"step_id", FieldSpec::int_range(0, 63)}}},
  };
  return p;
}

// Variant with two timing buckets and a declared 1-bit per-turn time budget.
inline PolicyDocument timing_channel_policy() {
  PolicyDocument p = default_policy();
  p.version = "desk-1-timing";
  p.timing.buckets = 2;
  p.residual_budgets.time = 1.0;
  return p;
}

}  // namespace clbc
