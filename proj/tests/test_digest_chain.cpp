#include <gtest/gtest.h>

#include <random>

#include "clbc/chain.hpp"
#include "clbc/digest.hpp"
#include "test_util.hpp"

using namespace clbc;

TEST(Digest, KnownVectors) {
  auto kv = read_kv_tsv(vector_path("derivation_vectors.tsv"));
  EXPECT_EQ(sha256("").hex(), kv.at("empty_sha256"));
  EXPECT_EQ(sha256("abc").hex(), kv.at("abc_sha256"));
  EXPECT_EQ(sha256("{}").hex(), kv.at("empty_map_sha256"));
}

TEST(Digest, HmacRfc4231Case2) {
  // RFC 4231 test case 2: key "Jefe", data "what do ya want for nothing?"
  Bytes key = string_to_bytes("Jefe");
  Bytes msg = string_to_bytes("what do ya want for nothing?");
  EXPECT_EQ(hmac(key, msg).hex(),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(Digest, BitFlipSeparation) {
  std::mt19937_64 rng(0xd1f);
  for (int i = 0; i < 1000; ++i) {
    std::string a(1 + rng() % 64, '\0');
    for (auto& c : a) c = static_cast<char>(rng());
    std::string b = a;
    std::size_t pos = rng() % b.size();
    b[pos] = static_cast<char>(b[pos] ^ (1u << (rng() % 8)));
    EXPECT_NE(sha256(a), sha256(b));
  }
}

TEST(Digest, HexRoundTrip) {
  Digest d = sha256("abc");
  EXPECT_EQ(Digest::from_hex(d.hex()), d);
  EXPECT_THROW(Digest::from_hex("abcd"), ParseError);
  EXPECT_THROW(Digest::from_hex(std::string(63, 'a')), ParseError);
}

TEST(Chain, GenesisLinkVector) {
  auto kv = read_kv_tsv(vector_path("derivation_vectors.tsv"));
  ChainLink l = extend_chain(zero_digest(), string_to_bytes("{}"), 0);
  EXPECT_EQ(l.link.hex(), kv.at("chain_genesis_empty_map_turn0"));
  EXPECT_TRUE(l.prev.is_zero());
  EXPECT_EQ(l.turn_index, 0u);
}

TEST(Chain, DeterministicAndOrderSensitive) {
  Bytes p1 = string_to_bytes("{\"a\":1}");
  Bytes p2 = string_to_bytes("{\"b\":2}");
  ChainLink a0 = extend_chain(zero_digest(), p1, 0);
  ChainLink a1 = extend_chain(a0.link, p2, 1);
  ChainLink b0 = extend_chain(zero_digest(), p2, 0);
  ChainLink b1 = extend_chain(b0.link, p1, 1);
  EXPECT_EQ(extend_chain(zero_digest(), p1, 0), a0);
  EXPECT_NE(a1.link, b1.link);  // same payload set, different order
}

TEST(Chain, TamperDetection) {
  std::mt19937_64 rng(0xc4a);
  for (int i = 0; i < 200; ++i) {
    Bytes payload = string_to_bytes("{\"n\":" + std::to_string(rng() % 100000) + "}");
    ChainLink l = extend_chain(zero_digest(), payload, 3);
    Bytes mutated = payload;
    mutated[rng() % mutated.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    ChainLink m = extend_chain(zero_digest(), mutated, 3);
    EXPECT_NE(l.link, m.link);
    EXPECT_NE(chain_link_digest(l.prev, l.payload, 4), l.link);  // index shift
  }
}

TEST(Chain, NegativeTurnRejected) {
  EXPECT_THROW(extend_chain(zero_digest(), string_to_bytes("{}"), -1), NegativeTurn);
}

TEST(Chain, ReplayEqualsRecomputation) {
  std::vector<Bytes> payloads;
  for (int i = 0; i < 16; ++i) payloads.push_back(string_to_bytes("{\"t\":" + std::to_string(i) + "}"));
  Digest head = zero_digest();
  std::vector<ChainLink> links;
  for (int i = 0; i < 16; ++i) {
    links.push_back(extend_chain(head, payloads[i], i));
    head = links.back().link;
  }
  Digest replay = zero_digest();
  for (int i = 0; i < 16; ++i) {
    EXPECT_EQ(links[i].prev, replay);
    EXPECT_EQ(chain_link_digest(replay, sha256(payloads[i]), i), links[i].link);
    replay = links[i].link;
  }
  EXPECT_EQ(replay, head);
}
