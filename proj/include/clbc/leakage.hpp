#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "clbc/errors.hpp"
#include "clbc/value.hpp"

namespace clbc {

// Per-turn features a transcript observer can extract from admitted record
// bytes. A rejected turn is observable as an absence and carries the -1
// marker in every slot.
struct FeatureVector {
  std::int64_t option_index{-1};
  std::int64_t tool_index{-1};
  std::int64_t bucket{-1};
  std::int64_t fingerprint{-1};

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

  static FeatureVector rejected_marker() { return {}; }
};

using FeatureSequence = std::vector<FeatureVector>;

struct LabeledSample {
  FeatureSequence features;
  std::int64_t hidden_state{0};
};

// Whole-episode discretized symbol: the concatenation of per-turn tuples.
inline std::string feature_symbol(const FeatureSequence& seq) {
  std::string out;
  for (const FeatureVector& f : seq) {
    out += std::to_string(f.option_index);
    out += ',';
    out += std::to_string(f.tool_index);
    out += ',';
    out += std::to_string(f.bucket);
    out += ',';
    out += std::to_string(f.fingerprint);
    out += ';';
  }
  return out;
}

inline constexpr double kLaplaceAlpha = 0.5;

// n below which an estimate is flagged inconclusive rather than reported.
inline std::int64_t sample_guard(double alpha, double delta, double constant) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("sample guard alpha must be in (0,1)");
  if (!(delta > 0.0)) throw ConfigError("sample guard delta must be positive");
  if (!(constant > 0.0)) throw ConfigError("sample guard constant must be positive");
  return static_cast<std::int64_t>(std::ceil(constant * std::log(1.0 / alpha) / (delta * delta)));
}

// MAP decoder on the episode symbol: empirical class frequencies per symbol
// with Laplace smoothing; unseen symbols fall back to the argmax of the true
// prior (lowest index on ties). Advantage = held-out accuracy minus the best
// blind guess.
inline double decoder_advantage(const std::vector<LabeledSample>& samples,
                                const std::vector<double>& prior, std::uint64_t split_seed,
                                double alpha = kLaplaceAlpha) {
  if (samples.size() < 2) throw InsufficientSamples("decoder needs at least 2 samples");
  if (prior.empty()) throw ConfigError("decoder needs a nonempty prior");
  const std::size_t k = prior.size();

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t train_n = samples.size() / 2;

  std::map<std::string, std::vector<double>> counts;
  for (std::size_t i = 0; i < train_n; ++i) {
    const LabeledSample& s = samples[order[i]];
    auto& row = counts[feature_symbol(s.features)];
    if (row.empty()) row.assign(k, 0.0);
    std::size_t cls = static_cast<std::size_t>(s.hidden_state);
    if (cls >= k) throw ConfigError("hidden state outside prior support");
    row[cls] += 1.0;
  }

  std::size_t prior_argmax = 0;
  for (std::size_t s = 1; s < k; ++s)
    if (prior[s] > prior[prior_argmax]) prior_argmax = s;

  std::size_t correct = 0, tested = 0;
  for (std::size_t i = train_n; i < samples.size(); ++i) {
    const LabeledSample& s = samples[order[i]];
    std::size_t guess = prior_argmax;
    auto it = counts.find(feature_symbol(s.features));
    if (it != counts.end()) {
      double best = -1.0;
      for (std::size_t cls = 0; cls < k; ++cls) {
        double score = it->second[cls] + alpha;
        if (score > best) {
          best = score;
          guess = cls;
        }
      }
    }
    if (guess == static_cast<std::size_t>(s.hidden_state)) ++correct;
    ++tested;
  }
  if (tested == 0) throw InsufficientSamples("empty test split");

  double max_prior = *std::max_element(prior.begin(), prior.end());
  double adv = static_cast<double>(correct) / static_cast<double>(tested) - max_prior;
  // The trivial decoder that ignores features always achieves the prior, so
  // the advantage is nonnegative; sampling dips below zero are noise.
  return std::clamp(adv, 0.0, 1.0);
}

// Plug-in mutual information (bits) between the hidden state and the episode
// symbol, Laplace smoothing on the joint table over observed symbols.
inline double mi_proxy(const std::vector<LabeledSample>& samples, std::size_t k,
                       double alpha = kLaplaceAlpha) {
  if (samples.empty()) throw InsufficientSamples("mi proxy needs samples");
  if (k == 0) throw ConfigError("mi proxy needs k >= 1");
  std::map<std::string, std::vector<double>> joint;
  for (const LabeledSample& s : samples) {
    auto& row = joint[feature_symbol(s.features)];
    if (row.empty()) row.assign(k, 0.0);
    std::size_t cls = static_cast<std::size_t>(s.hidden_state);
    if (cls >= k) throw ConfigError("hidden state outside alphabet");
    row[cls] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  const double total = n + alpha * static_cast<double>(joint.size()) * static_cast<double>(k);

  std::vector<double> p_class(k, 0.0);
  double mi = 0.0;
  std::vector<double> p_sym;
  p_sym.reserve(joint.size());
  for (const auto& [sym, row] : joint) {
    double ps = 0.0;
    for (std::size_t cls = 0; cls < k; ++cls) {
      double p = (row[cls] + alpha) / total;
      ps += p;
      p_class[cls] += p;
    }
    p_sym.push_back(ps);
  }
  std::size_t si = 0;
  for (const auto& [sym, row] : joint) {
    for (std::size_t cls = 0; cls < k; ++cls) {
      double p = (row[cls] + alpha) / total;
      if (p > 0.0) mi += p * std::log2(p / (p_sym[si] * p_class[cls]));
    }
    ++si;
  }
  return std::max(0.0, mi);
}

// Percentile bootstrap (2.5/97.5) of an arbitrary sample statistic.
inline std::pair<double, double> bootstrap_ci(
    const std::vector<LabeledSample>& samples,
    const std::function<double(const std::vector<LabeledSample>&)>& statistic, int replicates,
    std::uint64_t seed) {
  if (replicates < 100) throw ConfigError("bootstrap needs at least 100 replicates");
  if (samples.empty()) throw InsufficientSamples("bootstrap needs samples");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(replicates));
  std::vector<LabeledSample> resample(samples.size());
  for (int b = 0; b < replicates; ++b) {
    for (std::size_t i = 0; i < samples.size(); ++i) resample[i] = samples[pick(rng)];
    stats.push_back(statistic(resample));
  }
  std::sort(stats.begin(), stats.end());
  auto rank = [&](double q) {
    double idx = q * static_cast<double>(stats.size() - 1);
    return stats[static_cast<std::size_t>(std::llround(idx))];
  };
  return {rank(0.025), rank(0.975)};
}

// One measurement slice: which lane, which seed, what came out.
struct LeakageReport {
  double decoder_adv{0.0};
  double mi_proxy_bits{0.0};
  std::optional<double> exact_mi_bits;
  double ci_low{0.0};
  double ci_high{0.0};
  std::int64_t n_samples{0};
  std::string family;
  std::uint64_t seed{0};
  std::string baseline_class;
  double utility_mean{0.0};
  double success_mean{0.0};
  double unique_response{0.0};
  bool inconclusive{false};

  Value to_value() const {
    Value::Map m;
    m.emplace("baseline_class", Value::string(baseline_class));
    m.emplace("ci_high", Value::decimal_from_double(ci_high, 4));
    m.emplace("ci_low", Value::decimal_from_double(ci_low, 4));
    m.emplace("decoder_adv", Value::decimal_from_double(decoder_adv, 4));
    if (exact_mi_bits) m.emplace("exact_mi_bits", Value::decimal_from_double(*exact_mi_bits, 4));
    m.emplace("family", Value::string(family));
    m.emplace("inconclusive", Value::boolean(inconclusive));
    m.emplace("mi_proxy_bits", Value::decimal_from_double(mi_proxy_bits, 4));
    m.emplace("n_samples", Value::integer(n_samples));
    m.emplace("seed", Value::integer(static_cast<std::int64_t>(seed)));
    m.emplace("success_mean", Value::decimal_from_double(success_mean, 4));
    m.emplace("unique_response", Value::decimal_from_double(unique_response, 4));
    m.emplace("utility_mean", Value::decimal_from_double(utility_mean, 4));
    return Value::map(std::move(m));
  }

  static LeakageReport from_value(const Value& v) {
    LeakageReport r;
    r.baseline_class = v.at("baseline_class").as_string();
    r.ci_high = v.at("ci_high").as_double();
    r.ci_low = v.at("ci_low").as_double();
    r.decoder_adv = v.at("decoder_adv").as_double();
    if (v.find("exact_mi_bits")) r.exact_mi_bits = v.at("exact_mi_bits").as_double();
    r.family = v.at("family").as_string();
    r.inconclusive = v.at("inconclusive").as_bool();
    r.mi_proxy_bits = v.at("mi_proxy_bits").as_double();
    r.n_samples = v.at("n_samples").as_int();
    r.seed = static_cast<std::uint64_t>(v.at("seed").as_int());
    r.success_mean = v.at("success_mean").as_double();
    r.unique_response = v.at("unique_response").as_double();
    r.utility_mean = v.at("utility_mean").as_double();
    return r;
  }
};

}  // namespace clbc
