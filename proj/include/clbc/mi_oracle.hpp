#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clbc/harness.hpp"

namespace clbc {

// Declared per-turn side-channel allowances for a run, in bits. The
// aggregate is the exact component sum; nothing is inferred from data.
struct ResidualLedger {
  ResidualBudgets per_turn;
  std::int64_t turns{0};

  double total() const { return per_turn.per_turn_total() * static_cast<double>(turns); }

  static ResidualLedger from_policy(const PolicyDocument& policy, std::int64_t turns) {
    return {policy.residual_budgets, turns};
  }
};

inline constexpr std::int64_t kEnumerationGuard = 1000000;

namespace detail {

// Deterministic trajectory per hidden state: with the schedule seed fixed,
// every distribution in sight is a pushforward of the prior over s, so exact
// quantities reduce to entropies of partitions of the s-alphabet.
inline std::vector<EpisodeResult> enumerate_trajectories(const Catalog& catalog,
                                                         const LaneSettings& lane,
                                                         const AttackStrategy* strategy) {
  if (catalog.k <= 0) throw ConfigError("catalog k must be positive");
  std::int64_t joint = catalog.k;
  for (const TaskInstance& t : catalog.tasks) {
    joint *= static_cast<std::int64_t>(std::max<std::size_t>(t.options.size(), 1));
    if (joint > kEnumerationGuard)
      throw StateSpaceTooLarge("joint outcome space exceeds the enumeration guard");
  }
  std::vector<EpisodeResult> out;
  out.reserve(static_cast<std::size_t>(catalog.k));
  for (std::int64_t s = 0; s < catalog.k; ++s) {
    Producer producer =
        strategy ? colluding_producer(lane, *strategy, HiddenState::uniform(catalog.k, s))
                 : honest_producer(lane);
    out.push_back(run_episode(catalog, lane, producer, s));
  }
  return out;
}

inline double entropy_bits(const std::map<std::string, double>& dist) {
  double h = 0.0;
  for (const auto& [key, p] : dist)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

// H of the pushforward of the uniform prior under key(s).
inline double pushforward_entropy(const std::vector<std::string>& keys) {
  std::map<std::string, double> dist;
  const double p = 1.0 / static_cast<double>(keys.size());
  for (const std::string& k : keys) dist[k] += p;
  return entropy_bits(dist);
}

}  // namespace detail

// Exact MI(S; admitted transcript features), uniform S, by enumeration.
// Trajectories are deterministic given s, so the MI is the entropy of the
// feature-symbol pushforward.
inline double exact_mi_oracle(const Catalog& catalog, const LaneSettings& lane,
                              const std::optional<AttackStrategy>& strategy) {
  std::vector<EpisodeResult> runs =
      detail::enumerate_trajectories(catalog, lane, strategy ? &*strategy : nullptr);
  std::vector<std::string> symbols;
  symbols.reserve(runs.size());
  for (const EpisodeResult& r : runs) symbols.push_back(feature_symbol(r.features));
  return detail::pushforward_entropy(symbols);
}

// Exact MI(S; admitted latent sequence): same enumeration, latent view only.
inline double exact_latent_mi(const Catalog& catalog, const LaneSettings& lane,
                              const std::optional<AttackStrategy>& strategy) {
  std::vector<EpisodeResult> runs =
      detail::enumerate_trajectories(catalog, lane, strategy ? &*strategy : nullptr);
  std::vector<std::string> symbols;
  symbols.reserve(runs.size());
  for (const EpisodeResult& r : runs) {
    std::string key;
    for (std::size_t t = 0; t < r.turns.size(); ++t) {
      key += r.turns[t].admitted ? std::to_string(r.turns[t].features.option_index) : "x";
      key += ';';
    }
    symbols.push_back(key);
  }
  return detail::pushforward_entropy(symbols);
}

// Per-turn chain-rule decomposition of the latent MI: the turn-t term is the
// entropy gain of the latent partition when turn t is appended.
inline std::vector<double> per_turn_latent_mi(const Catalog& catalog, const LaneSettings& lane,
                                              const std::optional<AttackStrategy>& strategy) {
  std::vector<EpisodeResult> runs =
      detail::enumerate_trajectories(catalog, lane, strategy ? &*strategy : nullptr);
  std::vector<double> terms;
  double prev_entropy = 0.0;
  const std::size_t turn_count = runs.empty() ? 0 : runs.front().turns.size();
  for (std::size_t t = 0; t < turn_count; ++t) {
    std::vector<std::string> prefixes;
    prefixes.reserve(runs.size());
    for (const EpisodeResult& r : runs) {
      std::string key;
      for (std::size_t u = 0; u <= t; ++u) {
        key += r.turns[u].admitted ? std::to_string(r.turns[u].features.option_index) : "x";
        key += ';';
      }
      prefixes.push_back(key);
    }
    double h = detail::pushforward_entropy(prefixes);
    terms.push_back(h - prev_entropy);
    prev_entropy = h;
  }
  return terms;
}

struct BoundReport {
  double transcript_mi{0.0};
  double latent_mi_sum{0.0};
  double residual_sum{0.0};
  double slack{0.0};  // RHS - LHS; the bound holds iff slack >= -1e-9
  bool holds{false};
  bool zero_residual_equality{false};
};

// Composition bound check: transcript MI vs per-turn latent MI plus declared
// residual budget, on one enumerable configuration.
inline BoundReport bound_check(const Catalog& catalog, const LaneSettings& lane,
                               const std::optional<AttackStrategy>& strategy,
                               const ResidualLedger& residual) {
  BoundReport rep;
  rep.transcript_mi = exact_mi_oracle(catalog, lane, strategy);
  for (double term : per_turn_latent_mi(catalog, lane, strategy)) rep.latent_mi_sum += term;
  rep.residual_sum = residual.total();
  rep.slack = rep.latent_mi_sum + rep.residual_sum - rep.transcript_mi;
  rep.holds = rep.slack >= -1e-9;
  if (rep.residual_sum == 0.0)
    rep.zero_residual_equality = std::abs(rep.transcript_mi - rep.latent_mi_sum) <= 1e-9;
  return rep;
}

// Per-turn strategy schedule variant: turn t uses schedule[t % size]. Used
// for product-structure checks where each turn extracts one bit of s.
inline double exact_mi_oracle_scheduled(const Catalog& catalog, const LaneSettings& lane,
                                        const std::vector<AttackStrategy>& schedule) {
  if (schedule.empty()) throw ConfigError("empty strategy schedule");
  if (catalog.k <= 0) throw ConfigError("catalog k must be positive");
  std::int64_t joint = catalog.k;
  for (const TaskInstance& t : catalog.tasks)
    joint *= static_cast<std::int64_t>(std::max<std::size_t>(t.options.size(), 1));
  if (joint > kEnumerationGuard)
    throw StateSpaceTooLarge("joint outcome space exceeds the enumeration guard");

  std::vector<std::string> symbols;
  for (std::int64_t s = 0; s < catalog.k; ++s) {
    HiddenState hs = HiddenState::uniform(catalog.k, s);
    TranscriptState transcript;
    FeatureSequence features;
    AdmissionEnv admission = lane.admission_env();
    for (std::size_t t = 0; t < catalog.tasks.size(); ++t) {
      const TaskInstance& task = catalog.tasks[t];
      const AttackStrategy& strat = schedule[t % schedule.size()];
      PublicRandomness rand = derive_randomness(lane.seed, transcript.head, transcript.turn_count);
      TurnContext ctx{transcript.head, transcript.turn_count};
      Producer producer = colluding_producer(lane, strat, hs);
      CandidateEnvelope cand = producer(task, rand, ctx);
      if (lane.paraphrase_rewrite) cand = paraphrase_transform(cand, lane, rand, ctx.turn);
      AdmissionVerdict verdict = apply_admission(transcript, cand, admission, lane.policy, &task);
      features.push_back(verdict.admitted ? extract_features(cand.wire, cand.env)
                                          : FeatureVector::rejected_marker());
    }
    symbols.push_back(feature_symbol(features));
  }
  return detail::pushforward_entropy(symbols);
}

// Utility/leakage frontier sweep over enumerable configurations: emits
// (utility, transcript MI) per configuration and checks no point with
// utility >= floor dips below the feasible minimum latent MI at that level.
struct FrontierPoint {
  std::string label;
  double utility{0.0};
  double transcript_mi{0.0};
  double latent_mi{0.0};
};

inline bool frontier_dominance_holds(const std::vector<FrontierPoint>& points,
                                     double utility_floor) {
  double min_latent = std::numeric_limits<double>::infinity();
  for (const FrontierPoint& p : points)
    if (p.utility >= utility_floor) min_latent = std::min(min_latent, p.latent_mi);
  if (!std::isfinite(min_latent)) return true;
  for (const FrontierPoint& p : points)
    if (p.utility >= utility_floor && p.transcript_mi < min_latent - 1e-9) return false;
  return true;
}

}  // namespace clbc
