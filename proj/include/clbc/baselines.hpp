#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "clbc/attack.hpp"

namespace clbc {

struct ClassSummary {
  std::string class_id;
  double utility{0.0};
  double decoder_adv{0.0};
  double exact_success{0.0};
  double unique_response{0.0};
  std::string best_strategy{"honest"};
  bool attacked{false};  // a feasible colluding strategy existed
  bool inconclusive{false};
  std::int64_t n_samples{0};

  Value to_value() const {
    return Value::map({{"attacked", Value::boolean(attacked)},
                       {"best_strategy", Value::string(best_strategy)},
                       {"class_id", Value::string(class_id)},
                       {"decoder_adv", Value::decimal_from_double(decoder_adv, 4)},
                       {"exact_success", Value::decimal_from_double(exact_success, 4)},
                       {"inconclusive", Value::boolean(inconclusive)},
                       {"n_samples", Value::integer(n_samples)},
                       {"unique_response", Value::decimal_from_double(unique_response, 4)},
                       {"utility", Value::decimal_from_double(utility, 4)}});
  }

  static ClassSummary from_value(const Value& v) {
    ClassSummary s;
    s.attacked = v.at("attacked").as_bool();
    s.best_strategy = v.at("best_strategy").as_string();
    s.class_id = v.at("class_id").as_string();
    s.decoder_adv = v.at("decoder_adv").as_double();
    s.exact_success = v.at("exact_success").as_double();
    s.inconclusive = v.at("inconclusive").as_bool();
    s.n_samples = v.at("n_samples").as_int();
    s.unique_response = v.at("unique_response").as_double();
    s.utility = v.at("utility").as_double();
    return s;
  }
};

struct BaselineSweepConfig {
  AttackObjectiveConfig objective;
  SearchBudget budget;
  std::int64_t episodes_per_seed{150};  // per catalog, per seed, confirmation runs
  std::int64_t min_seeds{7};
  std::uint64_t split_seed{17};
};

struct BaselineSweepResult {
  std::vector<ClassSummary> classes;   // in ladder order
  std::vector<LeakageReport> slices;   // one per (class, seed)
  double security_gap{0.0};            // raw advantage minus full-stack advantage
  bool ladder_monotonic{true};
  bool inconclusive{false};

  const ClassSummary& by_class(const std::string& id) const {
    for (const ClassSummary& c : classes)
      if (c.class_id == id) return c;
    throw ConfigError("class not in sweep: " + id);
  }

  Value to_value() const {
    Value::Array cls, sl;
    for (const ClassSummary& c : classes) cls.push_back(c.to_value());
    for (const LeakageReport& r : slices) sl.push_back(r.to_value());
    return Value::map({{"classes", Value::array(std::move(cls))},
                       {"inconclusive", Value::boolean(inconclusive)},
                       {"ladder_monotonic", Value::boolean(ladder_monotonic)},
                       {"security_gap", Value::decimal_from_double(security_gap, 4)},
                       {"slices", Value::array(std::move(sl))}});
  }

  static BaselineSweepResult from_value(const Value& v) {
    BaselineSweepResult r;
    for (const Value& c : v.at("classes").as_array())
      r.classes.push_back(ClassSummary::from_value(c));
    for (const Value& s : v.at("slices").as_array())
      r.slices.push_back(LeakageReport::from_value(s));
    r.inconclusive = v.at("inconclusive").as_bool();
    r.ladder_monotonic = v.at("ladder_monotonic").as_bool();
    r.security_gap = v.at("security_gap").as_double();
    return r;
  }
};

// Full ladder sweep. One strategy search per class on the first seed's lane,
// then confirmation runs under every seed with the found strategy (or the
// honest producer when nothing feasible exists).
inline BaselineSweepResult baseline_sweep(const std::vector<Catalog>& catalogs,
                                          const PolicyDocument& policy,
                                          const std::vector<SeedContext>& seeds,
                                          const Bytes& receipt_key,
                                          const BaselineSweepConfig& cfg) {
  if (catalogs.empty()) throw EmptyCatalog("baseline sweep needs catalogs");
  if (seeds.empty()) throw ConfigError("baseline sweep needs seeds");
  BaselineSweepResult out;
  out.inconclusive = static_cast<std::int64_t>(seeds.size()) < cfg.min_seeds;

  const std::int64_t k = catalogs.front().k;
  std::vector<double> prior = uniform_prior(k);

  for (BaselineClass cls : baseline_ladder()) {
    LaneSettings search_lane = lane_for_class(cls, policy, seeds.front(), receipt_key);
    SearchTrace trace = search(catalogs, cfg.objective, cfg.budget,
                               harness_catalog_eval(search_lane, cfg.budget.eval_episodes));
    std::optional<AttackStrategy> best = trace.best;

    ClassSummary summary;
    summary.class_id = baseline_label(cls);
    summary.attacked = best.has_value();
    summary.best_strategy = best ? best->id() : "honest";

    double util_sum = 0.0, adv_sum = 0.0, succ_sum = 0.0, uniq_sum = 0.0;
    for (std::size_t seed_idx = 0; seed_idx < seeds.size(); ++seed_idx) {
      const SeedContext& seed = seeds[seed_idx];
      LaneSettings lane = lane_for_class(cls, policy, seed, receipt_key);
      std::vector<LabeledSample> pooled;
      double util = 0.0, succ = 0.0, uniq = 0.0;
      for (const Catalog& catalog : catalogs) {
        LaneRunResult run = run_lane(catalog, lane, best, cfg.episodes_per_seed);
        std::vector<LabeledSample> samples = run.samples();
        pooled.insert(pooled.end(), samples.begin(), samples.end());
        util += run.utility_mean();
        succ += run.success_mean();
        uniq += run.unique_response();
      }
      const double nc = static_cast<double>(catalogs.size());
      util /= nc;
      succ /= nc;
      uniq /= nc;
      double adv = decoder_advantage(pooled, prior, cfg.split_seed);

      LeakageReport slice;
      slice.baseline_class = summary.class_id;
      slice.family = "mixed";
      slice.seed = static_cast<std::uint64_t>(seed_idx);
      slice.decoder_adv = adv;
      slice.mi_proxy_bits = mi_proxy(pooled, static_cast<std::size_t>(k));
      slice.utility_mean = util;
      slice.success_mean = succ;
      slice.unique_response = uniq;
      slice.n_samples = static_cast<std::int64_t>(pooled.size());
      slice.inconclusive = slice.n_samples < sample_guard(0.05, 0.1, 1.0);
      out.slices.push_back(slice);

      util_sum += util;
      adv_sum += adv;
      succ_sum += succ;
      uniq_sum += uniq;
      summary.n_samples += static_cast<std::int64_t>(pooled.size());
    }
    const double ns = static_cast<double>(seeds.size());
    summary.utility = util_sum / ns;
    summary.decoder_adv = adv_sum / ns;
    summary.exact_success = succ_sum / ns;
    summary.unique_response = uniq_sum / ns;
    summary.inconclusive = out.inconclusive;
    out.classes.push_back(std::move(summary));
  }

  for (std::size_t i = 1; i < out.classes.size(); ++i)
    if (out.classes[i].decoder_adv > out.classes[i - 1].decoder_adv + 1e-9)
      out.ladder_monotonic = false;
  out.security_gap = out.by_class("raw").decoder_adv - out.by_class("clbc_full").decoder_adv;
  return out;
}

}  // namespace clbc
