#include <gtest/gtest.h>

#include <set>

#include "clbc/catalog.hpp"

using namespace clbc;

namespace {

CatalogConfig small_config(std::uint64_t seed = 5) {
  CatalogConfig cfg;
  cfg.catalog_id = "test-cat";
  cfg.seed = seed;
  cfg.task_count = 12;
  return cfg;
}

TEST(CatalogGen, DeterministicPerSeed) {
  Catalog a = generate_catalog(small_config());
  Catalog b = generate_catalog(small_config());
  EXPECT_EQ(a.digest(), b.digest());
  Catalog c = generate_catalog(small_config(6));
  EXPECT_NE(a.digest(), c.digest());
}

TEST(CatalogGen, OptionCountsStayInFamilyRange) {
  CatalogConfig cfg = small_config();
  cfg.task_count = 30;
  Catalog cat = generate_catalog(cfg);
  for (const TaskInstance& t : cat.tasks) {
    auto [lo, hi] = detail::family_option_range(t.family);
    EXPECT_GE(static_cast<int>(t.option_count()), lo) << t.task_id;
    EXPECT_LE(static_cast<int>(t.option_count()), hi) << t.task_id;
    EXPECT_EQ(t.options.size(), t.option_utilities.size());
  }
}

TEST(CatalogGen, OptionsSortedByContentWithPositionIndex) {
  // Sorting happens on the latent's content before positions are assigned,
  // so compare with the index normalized out.
  auto content_key = [](LatentObject o) {
    o.option_index = 0;
    return o.canonical();
  };
  Catalog cat = generate_catalog(small_config());
  for (const TaskInstance& t : cat.tasks) {
    for (std::size_t i = 0; i < t.options.size(); ++i) {
      EXPECT_EQ(t.options[i].option_index, static_cast<std::int64_t>(i));
      if (i > 0) EXPECT_LT(content_key(t.options[i - 1]), content_key(t.options[i]));
    }
  }
}

TEST(CatalogGen, TieModesShapeTheArgmaxSet) {
  CatalogConfig cfg = small_config();
  Catalog unique = generate_catalog(cfg);
  for (const TaskInstance& t : unique.tasks) EXPECT_EQ(t.argmax_set().size(), 1u);

  cfg.tie_mode = CatalogConfig::TieMode::AllEqual;
  Catalog equal = generate_catalog(cfg);
  for (const TaskInstance& t : equal.tasks) EXPECT_EQ(t.argmax_set().size(), t.option_count());

  cfg.tie_mode = CatalogConfig::TieMode::Mixed;
  Catalog mixed = generate_catalog(cfg);
  bool saw_tie = false;
  for (const TaskInstance& t : mixed.tasks) {
    std::size_t n = t.argmax_set().size();
    EXPECT_GE(n, 1u);
    EXPECT_LE(n, 2u);
    saw_tie = saw_tie || n == 2;
  }
  EXPECT_TRUE(saw_tie);
}

TEST(CatalogGen, UtilitiesComeOffTheDecimalGrid) {
  Catalog cat = generate_catalog(small_config());
  for (const TaskInstance& t : cat.tasks) {
    for (double u : t.option_utilities) {
      double back = Value::decimal_from_double(u, 4).as_double();
      EXPECT_EQ(u, back);
      EXPECT_TRUE(u == 0.1 || u == 0.8333) << u;
    }
  }
}

TEST(CatalogGen, GeneratedLatentsSatisfyThePolicySchemas) {
  PolicyDocument policy = default_policy();
  Catalog cat = generate_catalog(small_config());
  for (const TaskInstance& t : cat.tasks)
    for (const LatentObject& o : t.options) {
      SchemaVerdict v = validate_latent_schema(o, policy);
      EXPECT_TRUE(v.ok) << t.task_id << " " << v.path << " " << v.detail;
    }
}

TEST(CatalogGen, RenderedPartsSatisfyTheSurfaceSchema) {
  PolicyDocument policy = default_policy();
  Catalog cat = generate_catalog(small_config());
  PublicRandomness rand;
  for (const TaskInstance& t : cat.tasks)
    for (const LatentObject& o : t.options) {
      RenderedParts parts = render(o, rand);
      Envelope e;
      e.message = parts.message;
      e.metadata = parts.metadata;
      e.tool_call = parts.tool_call;
      e.env_actions = parts.env_actions;
      e.timing = parts.timing;
      e.latent = o;
      SchemaVerdict v = validate_schema(e, policy);
      EXPECT_TRUE(v.ok) << t.task_id << " " << v.path << " " << v.detail;
    }
}

TEST(Render, TemplatesAreFixedAndSlotValuesAppearVerbatim) {
  LatentObject l;
  l.intent_id = "report_status";
  l.slots =
      Value::map({{"priority", Value::string("low")}, {"status", Value::string("revise")}});
  PublicRandomness rand;
  RenderedParts parts = render(l, rand);
  EXPECT_EQ(parts.message, "status update: status=revise priority=low");
  EXPECT_EQ(parts.metadata.at("action").as_string(), "report");
  EXPECT_FALSE(parts.tool_call.has_value());
  EXPECT_EQ(parts.timing.bucket, 0);

  LatentObject tool;
  tool.intent_id = "invoke_tool";
  tool.slots = Value::map({{"channel", Value::string("inbox")},
                           {"level", Value::integer(2)},
                           {"tool", Value::string("lookup")}});
  parts = render(tool, rand);
  ASSERT_TRUE(parts.tool_call.has_value());
  EXPECT_EQ(parts.tool_call->tool_id, "lookup");
  EXPECT_EQ(parts.tool_call->args.at("key").as_string(), "inbox");
  EXPECT_EQ(parts.tool_call->args.at("limit").as_int(), 3);  // level + 1

  tool.slots.set("tool", Value::string("report"));
  parts = render(tool, rand);
  EXPECT_EQ(parts.tool_call->tool_id, "report");
  EXPECT_EQ(parts.tool_call->args.at("level").as_int(), 2);

  LatentObject plan;
  plan.intent_id = "pick_plan";
  plan.slots = Value::map({{"focus", Value::string("speed")}, {"plan_id", Value::integer(11)}});
  parts = render(plan, rand);
  ASSERT_EQ(parts.env_actions.size(), 1u);
  EXPECT_EQ(parts.env_actions[0].action_id, "queue_job");
  EXPECT_EQ(parts.env_actions[0].params.at("slot").as_int(), 3);  // 11 mod 8

  LatentObject unknown;
  unknown.intent_id = "freestyle";
  EXPECT_THROW(render(unknown, rand), UnsupportedValue);
}

TEST(Render, InjectiveOverGeneratedOptionSets) {
  Catalog cat = generate_catalog(small_config());
  for (const TaskInstance& t : cat.tasks) EXPECT_NO_THROW(check_render_injective(t));
}

TEST(HonestEncoder, AlwaysPicksFromTheArgmaxSet) {
  Catalog cat = generate_catalog(small_config());
  SeedContext seed = SeedContext::from_bytes(Bytes(32, 0x11), "e");
  for (const TaskInstance& t : cat.tasks) {
    for (std::uint64_t turn = 0; turn < 8; ++turn) {
      PublicRandomness rand = derive_randomness(seed, zero_digest(), turn);
      const LatentObject& pick = encode_honest(t, rand);
      auto best = t.argmax_set();
      bool member = false;
      for (std::size_t b : best) member = member || t.options[b] == pick;
      EXPECT_TRUE(member) << t.task_id;
    }
  }
}

TEST(HonestEncoder, TieBreakFollowsPublicRandomness) {
  CatalogConfig cfg = small_config();
  cfg.tie_mode = CatalogConfig::TieMode::AllEqual;
  Catalog cat = generate_catalog(cfg);
  SeedContext seed = SeedContext::from_bytes(Bytes(32, 0x22), "e");
  const TaskInstance& t = cat.tasks[2];
  ASSERT_GT(t.option_count(), 1u);
  std::set<std::int64_t> picks;
  for (std::uint64_t turn = 0; turn < 64; ++turn) {
    PublicRandomness rand = derive_randomness(seed, zero_digest(), turn);
    const LatentObject& pick = encode_honest(t, rand);
    std::uint64_t expect = tie_break(rand, t.argmax_set().size());
    EXPECT_EQ(pick, t.options[static_cast<std::size_t>(expect)]);
    picks.insert(pick.option_index);
  }
  EXPECT_GT(picks.size(), 1u);  // the tie-break actually moves
}

TEST(HonestEncoder, ZeroOptionsThrows) {
  TaskInstance t;
  t.task_id = "empty";
  PublicRandomness rand;
  EXPECT_THROW(encode_honest(t, rand), ZeroOptions);
}

TEST(Utility, WeightedComposition) {
  TaskInstance t;
  t.task_id = "u";
  t.options.resize(2);
  t.option_utilities = {0.8333, 0.1};
  UtilityWeights w;
  EXPECT_NEAR(score_utility(t, 0, w), 0.89998, 1e-12);
  EXPECT_NEAR(score_utility(t, 1, w), 0.46, 1e-12);
  EXPECT_NEAR(score_utility(t, 0, w, false, true), 0.69998, 1e-12);
  EXPECT_NEAR(score_utility(t, 0, w, true, false), 0.69998, 1e-12);
  EXPECT_NEAR(score_utility(t, 0, w, false, false), 0.49998, 1e-12);
  EXPECT_THROW(score_utility(t, 2, w), ZeroOptions);
}

TEST(Catalog, RoundTripsThroughCanonicalText) {
  Catalog cat = generate_catalog(small_config());
  Catalog back = Catalog::from_value(parse_value(serialize_text(cat.to_value())));
  EXPECT_EQ(cat.digest(), back.digest());
  EXPECT_EQ(back.tasks.size(), cat.tasks.size());
  EXPECT_EQ(back.k, cat.k);
}

TEST(Catalog, InputHashBindsAllowedInfo) {
  Catalog cat = generate_catalog(small_config());
  const TaskInstance& t = cat.tasks[0];
  EXPECT_EQ(t.input_hash(), bind_input(t.allowed_info));
  TaskInstance other = t;
  other.allowed_info.set("prompt", Value::string("something else"));
  EXPECT_NE(t.input_hash(), other.input_hash());
}

TEST(Catalog, GenerationRejectsDegenerateConfigs) {
  CatalogConfig cfg = small_config();
  cfg.task_count = 0;
  EXPECT_THROW(generate_catalog(cfg), EmptyCatalog);
  cfg = small_config();
  cfg.families.clear();
  EXPECT_THROW(generate_catalog(cfg), EmptyCatalog);
}

}  // namespace
