#include "mraft/crypto.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <vector>

namespace mraft::crypto {
namespace {

// Independent oracle: machine-word modular arithmetic for the toy group.
std::uint64_t modpow(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = r * b % m;
    b = b * b % m;
    e >>= 1;
  }
  return r;
}

Bytes msg(const char *s) { return Bytes(s, s + std::char_traits<char>::length(s)); }

TEST(Group, ToyAndSim256AreValid) {
  EXPECT_TRUE(GroupParams::toy().valid());
  EXPECT_TRUE(GroupParams::sim256().valid());
  EXPECT_EQ(GroupParams::sim256().element_bytes(), 32u);
  EXPECT_FALSE((GroupParams{23, 11, 1}).valid());
  EXPECT_FALSE((GroupParams{23, 7, 2}).valid());
}

TEST(Keygen, ToyGroup) {
  auto grp = GroupParams::toy();
  EXPECT_EQ(keypair_from_secret(grp, 3).pk, BigInt(modpow(2, 3, 23)));
  EXPECT_EQ(keypair_from_secret(grp, 3).pk, 8);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    auto kp = keygen(grp, seed);
    EXPECT_GE(kp.sk, 1);
    EXPECT_LE(kp.sk, 10);
    EXPECT_EQ(kp.pk, BigInt(modpow(2, kp.sk.convert_to<std::uint64_t>(), 23)));
  }
  auto a = keygen(GroupParams::sim256(), 42), b = keygen(GroupParams::sim256(), 42);
  EXPECT_EQ(a.sk, b.sk);
  EXPECT_EQ(a.pk, b.pk);
}

TEST(Schnorr, ToyVector) {
  auto grp = GroupParams::toy();
  // oracle values
  const std::uint64_t R = modpow(2, 5, 23), s = (5 + 7 * 3) % 11;
  ASSERT_EQ(R, 9u);
  ASSERT_EQ(s, 4u);
  ASSERT_EQ(modpow(2, s, 23), R * modpow(8, 7, 23) % 23);
  ASSERT_EQ(modpow(2, s, 23), 16u);

  auto m = msg("entry");
  auto sig = sign_with_nonce(grp, 3, m, 5, BigInt(7));
  EXPECT_EQ(sig.commitment, 9);
  EXPECT_EQ(sig.response, 4);
  EXPECT_TRUE(verify(grp, 8, m, sig, BigInt(7)));
  // wrong key sk'=4 -> pk'=16
  ASSERT_NE(modpow(2, 4, 23), 8u);
  EXPECT_FALSE(verify(grp, BigInt(modpow(2, 4, 23)), m, sig, BigInt(7)));
}

TEST(Schnorr, SignVerifyFuzz) {
  auto grp = GroupParams::sim256();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto kp = keygen(grp, seed);
    ByteWriter w;
    w.u64(seed * 7919).str("payload");
    Bytes m = w.take();
    auto sig = sign(grp, kp.sk, m, seed);
    ASSERT_TRUE(verify(grp, kp.pk, m, sig)) << seed;
    Bytes mutated = m;
    mutated[seed % mutated.size()] ^= static_cast<std::uint8_t>(1u << (seed % 8));
    ASSERT_FALSE(verify(grp, kp.pk, mutated, sig)) << seed;
  }
}

TEST(Schnorr, ChallengeDeterministic) {
  auto grp = GroupParams::sim256();
  auto m = msg("x");
  EXPECT_EQ(challenge(grp, 12345, m), challenge(grp, 12345, m));
  EXPECT_NE(challenge(grp, 12345, m), challenge(grp, 12346, m));
}

TEST(CoSi, TwoSignerToyVector) {
  auto grp = GroupParams::toy();
  // oracle
  const std::uint64_t Vhat = modpow(2, 5, 23) * modpow(2, 2, 23) % 23;
  const std::uint64_t rhat = ((5 + 7 * 3) + (2 + 7 * 4)) % 11;
  const std::uint64_t aggpk = modpow(2, 3, 23) * modpow(2, 4, 23) % 23;
  ASSERT_EQ(Vhat, 13u);
  ASSERT_EQ(rhat, 1u);
  ASSERT_EQ(aggpk, 13u);
  ASSERT_EQ(modpow(2, rhat, 23), Vhat * modpow(aggpk, 7, 23) % 23);

  auto s1 = cosi_commit_with_secret(grp, 5), s2 = cosi_commit_with_secret(grp, 2);
  std::vector<BigInt> commits{s1.commitment, s2.commitment};
  BigInt V = cosi_aggregate_commitments(grp, commits);
  EXPECT_EQ(V, 13);
  std::vector<BigInt> responses{cosi_respond(grp, 5, 7, 3), cosi_respond(grp, 2, 7, 4)};
  BigInt r = cosi_aggregate_responses(grp, responses);
  EXPECT_EQ(r, 1);
  std::vector<BigInt> pks{8, 16};
  ParticipationBitmap both(2);
  both.set(0);
  both.set(1);
  auto m = msg("M");
  EXPECT_TRUE(cosi_verify(grp, pks, both, m, V, r, BigInt(7)));
  EXPECT_EQ(aggregate_public_key(grp, pks, both), 13);

  // drop signer 2's response but leave its bit set
  BigInt partial = cosi_aggregate_responses(grp, std::span(responses).first(1));
  EXPECT_FALSE(cosi_verify(grp, pks, both, m, V, partial, BigInt(7)));
}

TEST(CoSi, SingleParticipantMatchesSchnorr) {
  auto grp = GroupParams::sim256();
  auto kp = keygen(grp, 9);
  auto m = msg("solo");
  auto sec = cosi_commit(grp, m);
  std::vector<BigInt> commits{sec.commitment};
  BigInt V = cosi_aggregate_commitments(grp, commits);
  BigInt c = cosi_challenge(grp, V, m);
  std::vector<BigInt> responses{cosi_respond(grp, sec.secret, c, kp.sk)};
  BigInt r = cosi_aggregate_responses(grp, responses);
  ParticipationBitmap bm(1);
  bm.set(0);
  std::vector<BigInt> pks{kp.pk};
  EXPECT_TRUE(cosi_verify(grp, pks, bm, m, V, r));
  EXPECT_TRUE(verify(grp, kp.pk, m, Signature{V, r}));
}

TEST(CoSi, EmptyAggregationRejected) {
  auto grp = GroupParams::toy();
  std::vector<BigInt> none;
  EXPECT_THROW(cosi_aggregate_commitments(grp, none), std::invalid_argument);
  EXPECT_THROW(cosi_aggregate_responses(grp, none), std::invalid_argument);
  std::vector<BigInt> pks{8};
  EXPECT_FALSE(cosi_verify(grp, pks, ParticipationBitmap(1), msg("m"), 2, 1, BigInt(1)));
}

// Every subset of a 5-key set: verification holds iff all partial responses
// use the common challenge.
TEST(CoSi, AggregationHomomorphismAllSubsets) {
  auto grp = GroupParams::toy();
  std::vector<KeyPair> keys;
  for (int sk = 1; sk <= 5; ++sk) keys.push_back(keypair_from_secret(grp, sk));
  std::vector<BigInt> pks;
  for (auto &k : keys) pks.push_back(k.pk);
  auto m = msg("subset");
  const BigInt c = 7, wrong = 3;
  for (unsigned mask = 1; mask < 32; ++mask) {
    ParticipationBitmap bm(5);
    std::vector<BigInt> commits, secrets;
    for (unsigned i = 0; i < 5; ++i)
      if (mask >> i & 1) {
        bm.set(i);
        BigInt v = (i * 3 + mask) % 10 + 1;
        secrets.push_back(v);
        commits.push_back(cosi_commit_with_secret(grp, v).commitment);
      }
    BigInt V = cosi_aggregate_commitments(grp, commits);
    auto members = bm.members();
    for (std::size_t deviant = 0; deviant <= members.size(); ++deviant) {
      std::vector<BigInt> rs;
      for (std::size_t k = 0; k < members.size(); ++k)
        rs.push_back(cosi_respond(grp, secrets[k], k == deviant ? wrong : c, keys[members[k]].sk));
      bool ok = cosi_verify(grp, pks, bm, m, V, cosi_aggregate_responses(grp, rs), c);
      EXPECT_EQ(ok, deviant == members.size()) << "mask=" << mask << " deviant=" << deviant;
    }
  }
}

TEST(CryptoContext, MemoizedResultsMatchDirect) {
  CryptoContext ctx(GroupParams::sim256());
  auto kp = keygen(ctx.group(), 5);
  auto m = msg("memo");
  auto sig = ctx.sign(kp.sk, m);
  EXPECT_EQ(sig, sign(ctx.group(), kp.sk, m));
  EXPECT_TRUE(ctx.verify(kp.pk, m, sig));
  EXPECT_TRUE(ctx.verify(kp.pk, m, sig));
  auto bad = sig;
  bad.response = (bad.response + 1) % ctx.group().q;
  EXPECT_FALSE(ctx.verify(kp.pk, m, bad));
}

} // namespace
} // namespace mraft::crypto
