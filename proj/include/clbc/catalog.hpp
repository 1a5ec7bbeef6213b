#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "clbc/envelope.hpp"
#include "clbc/errors.hpp"
#include "clbc/randomness.hpp"

namespace clbc {

enum class TaskFamily { Decision, Negotiation, Planning, Summarization, Teps, ToolUse };

inline std::string family_label(TaskFamily f) {
  switch (f) {
    case TaskFamily::Decision: return "decision";
    case TaskFamily::Negotiation: return "negotiation";
    case TaskFamily::Planning: return "planning";
    case TaskFamily::Summarization: return "summarization";
    case TaskFamily::Teps: return "teps";
    case TaskFamily::ToolUse: return "tool_use";
  }
  return "decision";
}

inline TaskFamily family_from_label(const std::string& s) {
  if (s == "decision") return TaskFamily::Decision;
  if (s == "negotiation") return TaskFamily::Negotiation;
  if (s == "planning") return TaskFamily::Planning;
  if (s == "summarization") return TaskFamily::Summarization;
  if (s == "teps") return TaskFamily::Teps;
  if (s == "tool_use") return TaskFamily::ToolUse;
  throw ParseError("unknown task family: " + s);
}

struct HiddenState {
  std::int64_t value{0};
  std::vector<double> prior;  // index s -> Pr[S = s]

  static HiddenState uniform(std::int64_t k, std::int64_t value) {
    HiddenState h;
    h.value = value;
    h.prior.assign(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
    return h;
  }

  double max_prior() const {
    double m = 0.0;
    for (double p : prior) m = std::max(m, p);
    return m;
  }
};

struct TaskInstance {
  std::string task_id;
  TaskFamily family{TaskFamily::Decision};
  Value allowed_info = Value::map();
  std::vector<LatentObject> options;      // sorted by canonical bytes
  std::vector<double> option_utilities;   // aligned, each in [0,1]

  Digest input_hash() const { return bind_input(allowed_info); }

  std::size_t option_count() const { return options.size(); }

  // Indices achieving the exact maximum utility. Utilities come off a fixed
  // decimal grid, so exact comparison is the intended tie semantics.
  std::vector<std::size_t> argmax_set() const {
    std::vector<std::size_t> out;
    if (options.empty()) return out;
    double best = *std::max_element(option_utilities.begin(), option_utilities.end());
    for (std::size_t i = 0; i < option_utilities.size(); ++i)
      if (option_utilities[i] == best) out.push_back(i);
    return out;
  }

  Value to_value() const {
    Value::Array opts, utils;
    for (const LatentObject& o : options) opts.push_back(o.to_value());
    for (double u : option_utilities) utils.push_back(Value::decimal_from_double(u, 4));
    return Value::map({{"allowed_info", allowed_info},
                       {"family", Value::string(family_label(family))},
                       {"option_utilities", Value::array(std::move(utils))},
                       {"options", Value::array(std::move(opts))},
                       {"task_id", Value::string(task_id)}});
  }

  static TaskInstance from_value(const Value& v) {
    TaskInstance t;
    t.allowed_info = v.at("allowed_info");
    t.family = family_from_label(v.at("family").as_string());
    for (const Value& u : v.at("option_utilities").as_array())
      t.option_utilities.push_back(u.as_double());
    for (const Value& o : v.at("options").as_array())
      t.options.push_back(LatentObject::from_value(o));
    t.task_id = v.at("task_id").as_string();
    if (t.options.size() != t.option_utilities.size())
      throw ParseError("option/utility arity mismatch in task " + t.task_id);
    return t;
  }
};

struct Catalog {
  std::string catalog_id;
  std::uint64_t seed{0};
  std::int64_t k{2};  // hidden-state alphabet size this catalog is evaluated with
  std::vector<TaskInstance> tasks;

  Value to_value() const {
    Value::Array ts;
    for (const TaskInstance& t : tasks) ts.push_back(t.to_value());
    return Value::map({{"catalog_id", Value::string(catalog_id)},
                       {"encoding_id", Value::string(std::string(kEncodingId))},
                       {"k", Value::integer(k)},
                       {"seed", Value::integer(static_cast<std::int64_t>(seed))},
                       {"tasks", Value::array(std::move(ts))}});
  }

  static Catalog from_value(const Value& v) {
    Catalog c;
    c.catalog_id = v.at("catalog_id").as_string();
    if (v.at("encoding_id").as_string() != kEncodingId)
      throw ParseError("catalog uses an unknown encoding id");
    c.k = v.at("k").as_int();
    c.seed = static_cast<std::uint64_t>(v.at("seed").as_int());
    for (const Value& t : v.at("tasks").as_array()) c.tasks.push_back(TaskInstance::from_value(t));
    return c;
  }

  Digest digest() const { return value_digest(to_value()); }
};

// ~~~~~ deterministic rendering ~~~~~

struct RenderedParts {
  std::string message;
  Value metadata = Value::map();
  std::optional<ToolCall> tool_call;
  std::vector<EnvAction> env_actions;
  TimingFields timing;  // rendering pins both fields to 0
};

// Fixed template per intent. Every slot value appears verbatim in the message
// text, which is what makes rendering injective over any set of distinct
// latent objects sharing an intent.
inline RenderedParts render(const LatentObject& latent, const PublicRandomness& rand) {
  (void)rand;  // templates are fixed; rand stays in the signature for rule variants
  RenderedParts out;
  const Value& slots = latent.slots;
  auto meta = [&](std::string action, std::string priority, std::string status) {
    out.metadata = Value::map({{"action", Value::string(std::move(action))},
                               {"priority", Value::string(std::move(priority))},
                               {"status", Value::string(std::move(status))}});
  };
  if (latent.intent_id == "report_status") {
    const std::string& st = slots.at("status").as_string();
    const std::string& pr = slots.at("priority").as_string();
    out.message = "status update: status=" + st + " priority=" + pr;
    meta("report", pr, st);
  } else if (latent.intent_id == "pick_plan") {
    std::int64_t plan = slots.at("plan_id").as_int();
    const std::string& focus = slots.at("focus").as_string();
    out.message = "plan selection: plan=" + std::to_string(plan) + " focus=" + focus;
    meta("plan", "medium", "ok");
    out.env_actions.push_back(
        {"queue_job", Value::map({{"slot", Value::integer(plan % 8)}}), 0});
  } else if (latent.intent_id == "summarize_doc") {
    std::int64_t doc = slots.at("doc_id").as_int();
    const std::string& angle = slots.at("angle").as_string();
    out.message = "summary for doc " + std::to_string(doc) + ": angle=" + angle;
    meta("summarize", "low", "ok");
  } else if (latent.intent_id == "counter_offer") {
    std::string amount = serialize_text(slots.at("amount"));
    const std::string& urgency = slots.at("urgency").as_string();
    out.message = "offer: amount=" + amount + " urgency=" + urgency;
    meta("offer", urgency, "ok");
  } else if (latent.intent_id == "invoke_tool") {
    const std::string& tool = slots.at("tool").as_string();
    const std::string& channel = slots.at("channel").as_string();
    std::int64_t level = slots.at("level").as_int();
    out.message = "tool call: " + tool + " channel=" + channel + " level=" + std::to_string(level);
    meta("invoke", "medium", "ok");
    ToolCall call;
    call.tool_id = tool;
    if (tool == "lookup") {
      call.args = Value::map(
          {{"key", Value::string(channel)}, {"limit", Value::integer(level + 1)}});
    } else {
      call.args =
          Value::map({{"channel", Value::string(channel)}, {"level", Value::integer(level)}});
    }
    out.tool_call = std::move(call);
  } else if (latent.intent_id == "teps_step") {
    std::int64_t step = slots.at("step_id").as_int();
    const std::string& mode = slots.at("mode").as_string();
    out.message = "protocol step " + std::to_string(step) + ": mode=" + mode;
    meta("select", "low", "ok");
  } else {
    throw UnsupportedValue("no template for intent: " + latent.intent_id);
  }
  return out;
}

// Honest option selection: tie-break over the utility-argmax subset, driven
// only by public randomness. There is deliberately no way to pass hidden
// state in here.
inline const LatentObject& encode_honest(const TaskInstance& task, const PublicRandomness& rand) {
  if (task.options.empty()) throw ZeroOptions("task has no options: " + task.task_id);
  std::vector<std::size_t> best = task.argmax_set();
  std::uint64_t pick = tie_break(rand, best.size());
  return task.options[best[static_cast<std::size_t>(pick)]];
}

struct UtilityWeights {
  double task{0.6};
  double format{0.2};
  double policy{0.2};
};

inline double score_utility(const TaskInstance& task, std::size_t option_index,
                            const UtilityWeights& w, bool format_ok = true,
                            bool policy_ok = true) {
  if (option_index >= task.option_utilities.size())
    throw ZeroOptions("option index out of range in " + task.task_id);
  return w.task * task.option_utilities[option_index] + w.format * (format_ok ? 1.0 : 0.0) +
         w.policy * (policy_ok ? 1.0 : 0.0);
}

// ~~~~~ generation ~~~~~

struct CatalogConfig {
  std::string catalog_id{"catalog-0"};
  std::uint64_t seed{0};
  std::int64_t k{2};
  std::vector<TaskFamily> families{TaskFamily::Decision, TaskFamily::Planning,
                                   TaskFamily::Summarization, TaskFamily::ToolUse,
                                   TaskFamily::Negotiation, TaskFamily::Teps};
  std::int64_t task_count{6};
  enum class TieMode { None, AllEqual, Mixed };
  TieMode tie_mode{TieMode::None};
  double argmax_utility{0.8333};
  double low_utility{0.1};
  std::optional<std::pair<int, int>> option_count_override;
};

namespace detail {

inline std::pair<int, int> family_option_range(TaskFamily f) {
  switch (f) {
    case TaskFamily::Decision:
    case TaskFamily::Summarization: return {2, 3};
    case TaskFamily::Negotiation:
    case TaskFamily::Teps: return {3, 8};
    case TaskFamily::Planning:
    case TaskFamily::ToolUse: return {4, 16};
  }
  return {2, 3};
}

inline const char* family_intent(TaskFamily f) {
  switch (f) {
    case TaskFamily::Decision: return "report_status";
    case TaskFamily::Negotiation: return "counter_offer";
    case TaskFamily::Planning: return "pick_plan";
    case TaskFamily::Summarization: return "summarize_doc";
    case TaskFamily::Teps: return "teps_step";
    case TaskFamily::ToolUse: return "invoke_tool";
  }
  return "report_status";
}

template <class Rng>
Value random_slots(TaskFamily f, Rng& rng) {
  auto pick = [&](const std::vector<std::string>& v) {
    return Value::string(v[rng() % v.size()]);
  };
  static const std::vector<std::string> priorities = {"high", "low", "medium"};
  static const std::vector<std::string> statuses = {"blocked", "ok", "revise"};
  static const std::vector<std::string> focuses = {"breadth", "clarity", "cost",  "depth",
                                                   "margin",  "quality", "reach", "reuse",
                                                   "risk",    "safety",  "scope", "speed",
                                                   "tempo",   "time",    "volume", "yield"};
  static const std::vector<std::string> angles = {"actors", "causes",  "costs", "impact",
                                                  "options", "risks", "scope", "timeline"};
  static const std::vector<std::string> modes = {"active",  "fallback", "paused", "primary",
                                                 "retry",   "standby",  "sync",   "verify"};
  static const std::vector<std::string> tools = {"lookup", "report"};
  static const std::vector<std::string> channels = {"board", "inbox"};
  switch (f) {
    case TaskFamily::Decision:
      return Value::map({{"priority", pick(priorities)}, {"status", pick(statuses)}});
    case TaskFamily::Planning:
      return Value::map({{"focus", pick(focuses)},
                         {"plan_id", Value::integer(static_cast<std::int64_t>(rng() % 32))}});
    case TaskFamily::Summarization:
      return Value::map({{"angle", pick(angles)},
                         {"doc_id", Value::integer(static_cast<std::int64_t>(rng() % 100))}});
    case TaskFamily::Negotiation:
      return Value::map(
          {{"amount", Value::decimal(static_cast<std::int64_t>(100 + rng() % 9900), 2)},
           {"urgency", pick(priorities)}});
    case TaskFamily::ToolUse:
      return Value::map({{"channel", pick(channels)},
                         {"level", Value::integer(static_cast<std::int64_t>(rng() % 4))},
                         {"tool", pick(tools)}});
    case TaskFamily::Teps:
      return Value::map({{"mode", pick(modes)},
                         {"step_id", Value::integer(static_cast<std::int64_t>(rng() % 64))}});
  }
  return Value::map();
}

}  // namespace detail

inline void check_render_injective(const TaskInstance& task) {
  std::set<std::string> messages;
  PublicRandomness rand;  // templates ignore it
  for (const LatentObject& o : task.options) {
    RenderedParts parts = render(o, rand);
    if (!messages.insert(parts.message).second)
      throw RenderCollision("duplicate rendered message in task " + task.task_id);
  }
}

inline Catalog generate_catalog(const CatalogConfig& cfg) {
  if (cfg.task_count <= 0) throw EmptyCatalog("catalog would have no tasks");
  if (cfg.families.empty()) throw EmptyCatalog("no task families configured");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Catalog cat;
  cat.catalog_id = cfg.catalog_id;
  cat.seed = cfg.seed;
  cat.k = cfg.k;
  for (std::int64_t i = 0; i < cfg.task_count; ++i) {
    TaskFamily fam = cfg.families[static_cast<std::size_t>(i) % cfg.families.size()];
    auto [lo, hi] = cfg.option_count_override.value_or(detail::family_option_range(fam));
    int m = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    TaskInstance task;
    task.task_id = cfg.catalog_id + "-t" + std::to_string(i);
    task.family = fam;
    task.allowed_info = Value::map({{"family", Value::string(family_label(fam))},
                                    {"prompt", Value::string("handle " + task.task_id)},
                                    {"task", Value::string(task.task_id)}});
    std::set<CanonicalBytes> seen;
    int guard = 0;
    while (static_cast<int>(task.options.size()) < m) {
      if (++guard > 10000) break;  // slot space smaller than m; keep what we have
      LatentObject cand;
      cand.intent_id = detail::family_intent(fam);
      cand.slots = detail::random_slots(fam, rng);
      CanonicalBytes key = canonicalize(cand.slots);
      if (seen.insert(key).second) task.options.push_back(std::move(cand));
    }
    if (task.options.empty()) throw EmptyCatalog("no options generated for " + task.task_id);
    std::sort(task.options.begin(), task.options.end(),
              [](const LatentObject& a, const LatentObject& b) { return a.canonical() < b.canonical(); });
    for (std::size_t j = 0; j < task.options.size(); ++j)
      task.options[j].option_index = static_cast<std::int64_t>(j);

    std::size_t n = task.options.size();
    auto grid = [](double x) { return Value::decimal_from_double(x, 4).as_double(); };
    switch (cfg.tie_mode) {
      case CatalogConfig::TieMode::AllEqual:
        task.option_utilities.assign(n, 1.0);
        break;
      case CatalogConfig::TieMode::None: {
        task.option_utilities.assign(n, grid(cfg.low_utility));
        task.option_utilities[rng() % n] = grid(cfg.argmax_utility);
        break;
      }
      case CatalogConfig::TieMode::Mixed: {
        task.option_utilities.assign(n, grid(cfg.low_utility));
        std::size_t first = rng() % n;
        task.option_utilities[first] = grid(cfg.argmax_utility);
        if (n > 1 && rng() % 2 == 0) {
          std::size_t second = rng() % n;
          if (second == first) second = (second + 1) % n;
          task.option_utilities[second] = grid(cfg.argmax_utility);
        }
        break;
      }
    }
    check_render_injective(task);
    cat.tasks.push_back(std::move(task));
  }
  return cat;
}

}  // namespace clbc
