#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "clbc/harness.hpp"
#include "clbc/mi_oracle.hpp"

namespace clbc_test {

// One composition-bound check case: a small enumerable catalog, a gating
// lane, an optional colluding strategy, and the residual declaration that is
// supposed to cover whatever the strategy's surface channel can carry.
// Budgets are set from the channel's worst-case per-turn capacity, so a
// failing bound is an accounting bug, not a tight draw.
struct BridgeFixture {
  clbc::Catalog catalog;
  clbc::LaneSettings lane;
  std::optional<clbc::AttackStrategy> strategy;
  clbc::ResidualLedger residual;
  std::string label;
};

inline BridgeFixture make_bridge_fixture(std::uint64_t index) {
  using namespace clbc;
  std::mt19937_64 rng(index * 0x9e3779b97f4a7c15ULL + 0xb5297a4d);
  BridgeFixture fx;

  CatalogConfig cfg;
  cfg.catalog_id = "bridge-" + std::to_string(index);
  cfg.seed = rng();
  cfg.k = 2 + static_cast<std::int64_t>(rng() % 3);
  cfg.task_count = 2 + static_cast<std::int64_t>(rng() % 2);
  cfg.option_count_override = {{2, 3}};
  fx.catalog = generate_catalog(cfg);

  int channel = static_cast<int>(rng() % 4);
  BaselineClass cls =
      std::array<BaselineClass, 3>{BaselineClass::Raw, BaselineClass::SchemaOnly,
                                   BaselineClass::ClbcFull}[rng() % 3];

  PolicyDocument policy = channel == 3 ? timing_channel_policy() : default_policy();
  Bytes seed_bytes(32, static_cast<std::uint8_t>(0x30 + index % 64));
  fx.lane = lane_for_class(cls, policy, SeedContext::from_bytes(seed_bytes, "bridge"),
                           Bytes(16, 0x77));

  AttackStrategy strat;
  switch (rng() % 3) {
    case 0:
      strat.family = StrategyFamily::Identity;
      break;
    case 1:
      strat.family = StrategyFamily::Modular;
      strat.params["base"] = 2;
      strat.params["shift"] = static_cast<std::int64_t>(rng() % 2);
      break;
    default:
      strat.family = StrategyFamily::XorFold;
      strat.params["mask"] = 1;
      break;
  }
  strat.params["channel"] = channel;
  fx.strategy = strat;

  fx.residual.turns = static_cast<std::int64_t>(fx.catalog.tasks.size());
  switch (channel) {
    case 1: fx.residual.per_turn.token = 3.0; break;  // <= 6 metadata orders
    case 2: fx.residual.per_turn.tool = 1.0; break;   // alias on/off
    case 3: fx.residual.per_turn.time = 1.0; break;   // two buckets
    default: break;                                   // semantic: all in the latent
  }
  fx.label = baseline_label(cls) + "/" + strat.id();
  return fx;
}

}  // namespace clbc_test
