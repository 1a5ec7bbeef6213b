#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "clbc/audit.hpp"
#include "clbc/harness.hpp"

using namespace clbc;

namespace {

struct AuditFixture : ::testing::Test {
  PolicyDocument policy = default_policy();
  SeedContext seed = SeedContext::from_bytes(Bytes(32, 0x19), "audit-epoch");
  Bytes key = Bytes(16, 0x44);
  Catalog cat;
  LaneSettings lane;
  TranscriptState transcript;
  AuditEpoch epoch;

  AuditFixture() {
    CatalogConfig cfg;
    cfg.catalog_id = "audit";
    cfg.seed = 17;
    cfg.task_count = 8;
    cat = generate_catalog(cfg);
    lane = lane_for_class(BaselineClass::ClbcFull, policy, seed, key);
    epoch = make_epoch(seed, policy.hash(), 0.1);
  }

  // A longer transcript by chaining episodes' turns into one state.
  void build_transcript(int episodes) {
    AdmissionEnv admission = lane.admission_env();
    for (int e = 0; e < episodes; ++e) {
      for (const TaskInstance& task : cat.tasks) {
        PublicRandomness rand =
            derive_randomness(lane.seed, transcript.head, transcript.turn_count);
        TurnContext ctx{transcript.head, transcript.turn_count};
        const LatentObject& latent = encode_honest(task, rand);
        Envelope env = make_turn_envelope(task, latent, render(latent, rand), rand,
                                          admission.policy_hash, ctx, lane.proof, key,
                                          seed.epoch_id);
        AdmissionVerdict v = apply_admission(transcript, CandidateEnvelope::from_envelope(env),
                                             admission, policy, &task);
        ASSERT_TRUE(v.admitted) << reason_label(v.reason) << " " << v.detail;
      }
    }
  }
};

TEST(ChallengeSelection, DeterministicDistinctPrefix) {
  std::vector<std::int64_t> a = select_challenges(100, 42, 10);
  std::vector<std::int64_t> b = select_challenges(100, 42, 10);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 10u);
  std::set<std::int64_t> uniq(a.begin(), a.end());
  EXPECT_EQ(uniq.size(), 10u);
  for (std::int64_t idx : a) {
    EXPECT_GE(idx, 0);
    EXPECT_LT(idx, 100);
  }
  EXPECT_NE(select_challenges(100, 43, 10), a);
}

TEST(ChallengeSelection, FullDrawIsAPermutation) {
  std::vector<std::int64_t> all = select_challenges(12, 7, 12);
  std::set<std::int64_t> uniq(all.begin(), all.end());
  EXPECT_EQ(uniq.size(), 12u);
}

TEST(ChallengeSelection, EveryIndexReachable) {
  // Across seeds each position appears with roughly uniform frequency.
  std::vector<int> hits(20, 0);
  for (std::uint64_t s = 0; s < 400; ++s)
    for (std::int64_t idx : select_challenges(20, s, 5)) ++hits[static_cast<std::size_t>(idx)];
  for (int h : hits) {
    EXPECT_GT(h, 60);   // expectation 100 per slot
    EXPECT_LT(h, 140);
  }
}

TEST(ChallengeSelection, Validation) {
  EXPECT_THROW(select_challenges(0, 1, 1), ConfigError);
  EXPECT_THROW(select_challenges(10, 1, 0), ConfigError);
  EXPECT_THROW(select_challenges(10, 1, 11), ConfigError);
}

TEST_F(AuditFixture, CleanTranscriptPassesEveryChallenge) {
  build_transcript(3);
  std::vector<std::int64_t> picks = select_challenges(transcript.turn_count, 5, 8);
  AuditVerdict v = respond_and_verify(transcript, picks, epoch);
  EXPECT_TRUE(v.pass);
  EXPECT_TRUE(v.findings.empty());
}

TEST_F(AuditFixture, EachPacketCorruptionNamesItsCheck) {
  build_transcript(1);
  EvidencePacket p = build_packet(transcript, 2);
  EXPECT_EQ(verify_packet(p, epoch), "");

  EvidencePacket foreign = p;
  Envelope env = Envelope::from_value(parse_value(p.envelope));
  env.policy_hash.v[0] ^= 0x01;
  foreign.envelope = env.wire_bytes();
  EXPECT_EQ(verify_packet(foreign, epoch), "policy-hash-binding");

  EvidencePacket broken = p;
  broken.link.v[4] ^= 0x20;
  EXPECT_EQ(verify_packet(broken, epoch), "chain-continuity");

  EvidencePacket spliced = p;
  spliced.prev_link.v[0] ^= 0x01;
  EXPECT_EQ(verify_packet(spliced, epoch), "chain-continuity");

  EvidencePacket garbled = p;
  garbled.envelope = string_to_bytes("{not json");
  EXPECT_EQ(verify_packet(garbled, epoch), "chain-continuity");

  EvidencePacket odd_mech = p;
  odd_mech.proof_mechanism = "unsanctioned_prover";
  EXPECT_EQ(verify_packet(odd_mech, epoch), "proof-type");

  EvidencePacket bad_reason = p;
  bad_reason.recorded_reason = "schema";
  EXPECT_EQ(verify_packet(bad_reason, epoch), "reason-code");
}

TEST_F(AuditFixture, FindingsCarryTheTurnAndCheckName) {
  build_transcript(2);
  // Corrupt one stored record's link; the chain replay at that index fails.
  std::int64_t victim = 5;
  transcript.admitted[static_cast<std::size_t>(victim)].link.link.v[0] ^= 0x08;
  std::vector<std::int64_t> picks = {1, victim, 9};
  AuditVerdict v = respond_and_verify(transcript, picks, epoch);
  EXPECT_FALSE(v.pass);
  ASSERT_EQ(v.findings.size(), 1u);
  EXPECT_EQ(v.findings[0].turn_index, victim);
  EXPECT_EQ(v.findings[0].failed_check, "chain-continuity");
}

TEST_F(AuditFixture, ChallengingAMissingTurnThrows) {
  build_transcript(1);
  EXPECT_THROW(build_packet(transcript, transcript.turn_count), MissingTurn);
  EXPECT_THROW(build_packet(transcript, -1), MissingTurn);
}

TEST(DetectionMath, ClosedFormMatchesKnownPoints) {
  EXPECT_NEAR(detection_probability(0.1, 10), 0.6513, 5e-5);
  EXPECT_NEAR(detection_probability(0.05, 50), 1.0 - std::pow(0.95, 50), 1e-12);
  EXPECT_DOUBLE_EQ(detection_probability(0.0, 100), 0.0);
  EXPECT_DOUBLE_EQ(detection_probability(1.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(detection_probability(0.3, 0), 0.0);
  EXPECT_THROW(detection_probability(-0.1, 5), ConfigError);
  EXPECT_THROW(detection_probability(1.1, 5), ConfigError);
  EXPECT_THROW(detection_probability(0.1, -1), ConfigError);
}

TEST_F(AuditFixture, MonteCarloMatchesTheClosedForm) {
  // Corrupt a fraction f of a 1000-record ledger, then measure how often an
  // m-challenge draw hits at least one corrupted index. The ledger has to be
  // long: challenges are drawn without replacement, and the closed form
  // assumes the with-replacement limit. One configuration here; the full
  // grid runs in the acceptance suite.
  build_transcript(125);
  const std::int64_t len = transcript.turn_count;
  ASSERT_EQ(len, 1000);
  const double f = 0.1;
  const std::int64_t m = 10;
  const std::int64_t corrupt_n = static_cast<std::int64_t>(f * static_cast<double>(len));
  ASSERT_GT(corrupt_n, 0);

  TranscriptState damaged = transcript;
  std::mt19937_64 rng(99);
  std::set<std::int64_t> corrupted;
  while (static_cast<std::int64_t>(corrupted.size()) < corrupt_n)
    corrupted.insert(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(len)));
  for (std::int64_t idx : corrupted)
    damaged.admitted[static_cast<std::size_t>(idx)].link.link.v[7] ^= 0x11;

  // Real verification path per index, precomputed once.
  std::vector<bool> caught(static_cast<std::size_t>(len));
  for (std::int64_t i = 0; i < len; ++i)
    caught[static_cast<std::size_t>(i)] = !verify_packet(build_packet(damaged, i), epoch).empty();
  for (std::int64_t idx : corrupted) EXPECT_TRUE(caught[static_cast<std::size_t>(idx)]);

  const int trials = 10000;
  int detected = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::int64_t> picks =
        select_challenges(len, 1000 + static_cast<std::uint64_t>(t), m);
    for (std::int64_t idx : picks)
      if (caught[static_cast<std::size_t>(idx)]) {
        ++detected;
        break;
      }
  }
  double observed = static_cast<double>(detected) / trials;
  // Exact f on this ledger is corrupt_n/len; compare against its own curve.
  double f_exact = static_cast<double>(corrupt_n) / static_cast<double>(len);
  EXPECT_NEAR(observed, detection_probability(f_exact, m), 0.02);
}

TEST(EpochGuards, CrossEpochComparisonsAreRefused) {
  SeedContext s1 = SeedContext::from_bytes(Bytes(32, 0x01), "e1");
  SeedContext s2 = SeedContext::from_bytes(Bytes(32, 0x02), "e2");
  Digest ph = default_policy().hash();
  AuditEpoch a = make_epoch(s1, ph, 0.1);
  EXPECT_NO_THROW(require_same_epoch(a, a));

  AuditEpoch renamed = make_epoch(s2, ph, 0.1);
  EXPECT_THROW(require_same_epoch(a, renamed), ConfigError);

  AuditEpoch repoliced = a;
  repoliced.policy_hash.v[0] ^= 0x01;
  EXPECT_THROW(require_same_epoch(a, repoliced), ConfigError);

  AuditEpoch reversioned = a;
  reversioned.verifier_version = "clbc-verifier-2";
  EXPECT_THROW(require_same_epoch(a, reversioned), ConfigError);
}

TEST(EpochRegistry, LogRoundTripsAndCommitmentHidesTheSeed) {
  SeedContext s1 = SeedContext::from_bytes(Bytes(32, 0x0a), "e1");
  SeedContext s2 = SeedContext::from_bytes(Bytes(32, 0x0b), "e2");
  Digest ph = default_policy().hash();
  std::vector<AuditEpoch> reg = {make_epoch(s1, ph, 0.1), make_epoch(s2, ph, 0.05)};
  std::string log = epoch_registry_to_log(reg);
  std::vector<AuditEpoch> back = epoch_registry_from_log(log);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].epoch_id, "e1");
  EXPECT_DOUBLE_EQ(back[1].challenge_rate, 0.05);
  EXPECT_EQ(epoch_registry_to_log(back), log);

  // The published commitment is the hash of the seed, not the seed.
  EXPECT_EQ(reg[0].schedule_commitment, s1.commitment());
  EXPECT_NE(log.find(s1.commitment().hex()), std::string::npos);
  EXPECT_EQ(log.find(to_hex(Bytes(32, 0x0a))), std::string::npos);
}

}  // namespace
