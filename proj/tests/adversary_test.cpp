#include "mraft/adversary.hpp"
#include "mraft/harness.hpp"

#include <gtest/gtest.h>

using namespace mraft;

namespace {

const std::vector<bool> kTee = {true, true, false, false, false};

std::vector<Outbound> to_all(const MessagePtr &m, std::size_t n = 5, NodeId self = 2) {
  std::vector<Outbound> out;
  for (NodeId i = 0; i < n; ++i)
    if (i != self) out.push_back({i, m});
  return out;
}

Append sample_append() {
  return Append{1, 0, Digest{}, {LogEntry{1, 1, 1, {1, 2, 3}}, LogEntry{1, 2, 2, {4}}}, 0};
}

} // namespace

TEST(FaultSchedule, AcceptsUpToFFaultyNodes) {
  FaultSchedule s;
  s.crashes.push_back({0, 10});
  EXPECT_NO_THROW(s.validate(kTee, 1));
  s.byzantine.push_back({3, Strategy::Mute});
  EXPECT_THROW(s.validate(kTee, 1), ConfigError);
  EXPECT_NO_THROW(s.validate(std::vector<bool>(8, false), 2));
}

TEST(FaultSchedule, SameNodeCountsOnce) {
  FaultSchedule s;
  s.crashes.push_back({3, 10});
  s.byzantine.push_back({3, Strategy::Mute});
  EXPECT_NO_THROW(s.validate(kTee, 1));
}

TEST(FaultSchedule, RejectsByzantineTeeNode) {
  FaultSchedule s;
  s.byzantine.push_back({1, Strategy::Equivocate});
  try {
    s.validate(kTee, 1);
    FAIL() << "expected rejection";
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("faults.byzantine[0].node"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("TEE"), std::string::npos);
  }
}

TEST(FaultSchedule, RejectsBadPartitionsAndIds) {
  FaultSchedule overlap;
  overlap.partitions.push_back({{{0, 1}, {1, 2}}, 0, std::nullopt});
  EXPECT_THROW(overlap.validate(kTee, 1), ConfigError);
  FaultSchedule range;
  range.crashes.push_back({9, 0});
  EXPECT_THROW(range.validate(kTee, 1), ConfigError);
  FaultSchedule backwards;
  backwards.partitions.push_back({{{0}}, 100, 50});
  EXPECT_THROW(backwards.validate(kTee, 1), ConfigError);
  FaultSchedule twice;
  twice.byzantine = {{2, Strategy::Mute}, {2, Strategy::Mute}};
  EXPECT_THROW(twice.validate(kTee, 1), ConfigError);
}

TEST(FaultSchedule, PartitionsAreFreeAndTimed) {
  FaultSchedule s;
  s.partitions.push_back({{{0}, {1, 2}}, 100, 200});
  s.partitions.push_back({{{4}}, 150, std::nullopt});
  EXPECT_NO_THROW(s.validate(kTee, 1));
  EXPECT_FALSE(s.separated(0, 1, 99));
  EXPECT_TRUE(s.separated(0, 1, 100));
  EXPECT_FALSE(s.separated(1, 2, 120));
  EXPECT_TRUE(s.separated(0, 3, 120)); // node 3 is in the implicit group
  EXPECT_FALSE(s.separated(0, 1, 200));
  EXPECT_TRUE(s.separated(4, 3, 1e9));
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {Strategy::Equivocate, Strategy::DoubleVote, Strategy::StaleLie, Strategy::DigestCorrupt,
                 Strategy::Mute})
    EXPECT_EQ(strategy_from(strategy_name(s)), s);
  EXPECT_THROW(strategy_from("sneaky"), ConfigError);
}

TEST(Strategy, EquivocateSplitsRecipients) {
  const auto &grp = shared_crypto().group();
  auto m = make_message(sample_append());
  std::vector<Tamper> log;
  auto out = tamper_outbound(Strategy::Equivocate, to_all(m), grp, log);
  ASSERT_EQ(out.size(), 4u);
  std::set<Digest> digests;
  for (const auto &o : out) {
    const auto s = summarize(*o.body);
    digests.insert(*s.digest);
    EXPECT_EQ(s.index, 2u); // same slot, different content
    EXPECT_EQ(o.body == m, o.to % 2 == 0);
  }
  EXPECT_EQ(digests.size(), 2u);
  EXPECT_EQ(log.size(), 2u);
  // Every odd recipient gets the same forgery.
  EXPECT_EQ(out[1].body, out[2].body);
}

TEST(Strategy, EquivocateInflatesVoteClaimForOddRecipients) {
  const auto &grp = shared_crypto().group();
  std::vector<Tamper> log;
  auto out = tamper_outbound(Strategy::Equivocate, to_all(make_message(RequestVote{2, 3, 1, 4})), grp, log);
  for (const auto &o : out)
    EXPECT_EQ(std::get<RequestVote>(*o.body).last_log_index, o.to % 2 ? 5u : 4u);
}

TEST(Strategy, DigestCorruptAltersAcksOnly) {
  const auto &grp = shared_crypto().group();
  Digest d{};
  d[0] = 0x10;
  std::vector<Outbound> sends{{0, make_message(Ack{1, 3, d, 2, 0, false})},
                              {0, make_message(Ack{1, 3, d, 2, 0, true})},
                              {0, make_message(HeartBeat{1, 0, 0, Digest{}, {}})},
                              {0, make_message(CoSiResponse{1, 1, 3, BigInt(5)})}};
  std::vector<Tamper> log;
  auto out = tamper_outbound(Strategy::DigestCorrupt, sends, grp, log);
  EXPECT_NE(std::get<Ack>(*out[0].body).digest, d);
  EXPECT_EQ(std::get<Ack>(*out[1].body).digest, d);
  EXPECT_EQ(out[2].body, sends[2].body);
  EXPECT_EQ(std::get<CoSiResponse>(*out[3].body).response, BigInt(6));
  EXPECT_EQ(log.size(), 2u);
}

TEST(Strategy, MuteDropsEverything) {
  std::vector<Tamper> log;
  auto out = tamper_outbound(Strategy::Mute, to_all(make_message(sample_append())), shared_crypto().group(), log);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(log.size(), 4u);
}

TEST(Strategy, StaleLieInflatesRaftVoteRequest) {
  std::vector<Tamper> log;
  auto out = tamper_outbound(Strategy::StaleLie, to_all(make_message(RaftRequestVote{4, 2, 7})),
                             shared_crypto().group(), log);
  const auto &rv = std::get<RaftRequestVote>(*out[0].body);
  EXPECT_EQ(rv.last_log_index, 7 + kStaleLieInflation);
  EXPECT_EQ(rv.last_log_term, 4u);
}

TEST(Strategy, DoubleVoteSignsForEveryCandidate) {
  const auto keys = shared_keyring(kTee);
  const auto &cc = shared_crypto();
  for (NodeId cand : {0u, 1u}) {
    RequestVote rv{cand, 2, 0, 0};
    auto out = inbound_reaction(Strategy::DoubleVote, 3, cand, rv, keys.get(), cc);
    ASSERT_EQ(out.size(), 1u);
    const auto &v = std::get<Vote>(*out[0].body).record;
    EXPECT_EQ(v.candidate, cand);
    EXPECT_EQ(v.term, 2u);
    EXPECT_TRUE(cc.verify(keys->identity_pks[3], vote_statement(v.term, 3, cand, v.claim), v.sig));
  }
  EXPECT_TRUE(inbound_reaction(Strategy::DoubleVote, 3, 0, RequestVote{0, 2, 0, 0}, nullptr, cc).empty());
  EXPECT_TRUE(inbound_reaction(Strategy::Mute, 3, 0, RequestVote{0, 2, 0, 0}, keys.get(), cc).empty());
  auto raft = inbound_reaction(Strategy::DoubleVote, 3, 1, RaftRequestVote{5, 0, 0}, nullptr, cc);
  ASSERT_EQ(raft.size(), 1u);
  EXPECT_TRUE(std::get<RaftVote>(*raft[0].body).granted);
}

TEST(Strategy, ForgeriesCannotCarryOtherSignatures) {
  // A Byzantine node can sign only with its own key: a vote it fabricates
  // in another node's name fails verification.
  const auto keys = shared_keyring(kTee);
  const auto &cc = shared_crypto();
  VoteRecord v{2, 4, 3, {0, 0}, {}};
  v.sig = cc.sign(keys->identity[3].sk, vote_statement(2, 4, 3, v.claim));
  EXPECT_FALSE(cc.verify(keys->identity_pks[4], vote_statement(2, 4, 3, v.claim), v.sig));
}

// -- canned scenarios -------------------------------------------------------------------

TEST(Canned, AllNamesBuildAndValidate) {
  for (const auto &name : canned_names()) {
    for (std::size_t f : {1u, 3u}) {
      if (name == "entry_loss_ablation" && f != 1) continue;
      const Scenario s = canned_scenario(name, f, 1);
      EXPECT_NO_THROW(s.validate()) << name;
      EXPECT_EQ(s.n, 3 * f + 2);
      EXPECT_EQ(s.name, name);
    }
  }
  EXPECT_THROW(canned_scenario("no_such_thing", 1), ConfigError);
}

TEST(Canned, SafetyOverSeeds) {
  for (const auto &name : canned_names()) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto r = run_scenario(canned_scenario(name, 1, seed)).report;
      EXPECT_TRUE(r.violations.empty()) << name << " seed " << seed << ": " << r.violations.size();
    }
  }
}

TEST(Canned, TamperingIsTraced) {
  const auto r = run_scenario(canned_scenario("equivocating_leader", 1, 2));
  std::size_t tampers = 0;
  for (const auto &rec : r.trace.records) tampers += rec.kind == RecordKind::Tamper;
  EXPECT_GT(tampers, 0u);
  EXPECT_TRUE(r.report.violations.empty());
}

TEST(Canned, LeaderCrashElectsTeeNode) {
  const auto r = run_scenario(canned_scenario("leader_crash", 1, 4)).report;
  ASSERT_GE(r.leader_history.size(), 2u);
  EXPECT_TRUE(r.leader_history.back().tee);
  EXPECT_NE(r.leader_history.back().node, 0u);
  EXPECT_EQ(r.committed_requests, r.requests);
}

TEST(Canned, DoubleVoteKeepsOneLeaderPerTerm) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_scenario(canned_scenario("double_vote", 1, seed)).report;
    std::map<Term, std::set<NodeId>> leaders;
    for (const auto &l : r.leader_history) leaders[l.term].insert(l.node);
    for (const auto &[term, nodes] : leaders) EXPECT_EQ(nodes.size(), 1u) << "term " << term;
  }
}

TEST(Canned, AblationFindsEntryLossAtSmallQuorum) {
  bool found = false;
  for (std::uint64_t seed = 1; seed <= 20 && !found; ++seed) {
    Scenario s = canned_scenario("entry_loss_ablation", 1, seed);
    s.mraft.election_quorum = 3;
    for (const auto &v : run_scenario(s).report.violations) found |= v.kind == "DURABILITY";
  }
  EXPECT_TRUE(found);
}
