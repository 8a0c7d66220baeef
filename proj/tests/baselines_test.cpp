#include "mraft/harness.hpp"
#include "mraft/pbft.hpp"
#include "mraft/raft.hpp"

#include <gtest/gtest.h>

using namespace mraft;

namespace {

Scenario fault_free(Protocol p, std::size_t n, std::size_t requests = 200) {
  Scenario s;
  s.name = "baseline";
  s.protocol = p;
  s.n = n;
  s.latency.kind = "uniform";
  s.latency.ms = 5;
  s.workload.count = requests;
  return s;
}

template <class T>
std::size_t count_sends(const Effects &e) {
  std::size_t k = 0;
  for (const auto &o : e.sends) k += std::holds_alternative<T>(*o.body);
  return k;
}

template <class T>
const T *first_send(const Effects &e) {
  for (const auto &o : e.sends)
    if (auto *p = std::get_if<T>(o.body.get())) return p;
  return nullptr;
}

bool has_violation(const MetricsReport &r, const std::string &kind) {
  for (const auto &v : r.violations)
    if (v.kind == kind) return true;
  return false;
}

} // namespace

TEST(Params, Quorums) {
  EXPECT_EQ(raft_quorum(3), 2u);
  EXPECT_EQ(raft_quorum(5), 3u);
  EXPECT_EQ(raft_quorum(4), 3u);
  const auto p = pbft_params(4);
  EXPECT_EQ(p.f, 1u);
  EXPECT_EQ(p.quorum, 3u);
  EXPECT_EQ(pbft_params(13).quorum, 9u);
  EXPECT_THROW(pbft_params(6), ConfigError);
  EXPECT_THROW(pbft_params(0), ConfigError);
}

TEST(Raft, FaultFreeTwelveMessagesPerBatch) {
  const auto r = run_scenario(fault_free(Protocol::Raft, 5)).report;
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(r.committed_requests, 200u);
  EXPECT_DOUBLE_EQ(r.messages_per_commit, 12.0);
}

TEST(Raft, MessagesLinearInN) {
  for (std::size_t n : {3u, 7u, 11u}) {
    const auto r = run_scenario(fault_free(Protocol::Raft, n, 100)).report;
    EXPECT_DOUBLE_EQ(r.messages_per_commit, 3.0 * (n - 1)) << "n=" << n;
  }
}

TEST(Raft, ElectionNeedsMajority) {
  RaftOptions opt;
  opt.bootstrap_leader.reset();
  std::vector<RaftReplica> rs;
  for (NodeId i = 0; i < 5; ++i) rs.emplace_back(i, 5, opt);
  std::mt19937_64 rng(3);
  Context ctx{0, rng, shared_crypto()};
  for (auto &r : rs) r.start(ctx);
  auto e = rs[1].on_timer(TimerKind::Election, ctx);
  EXPECT_EQ(rs[1].role(), Role::Candidate);
  EXPECT_EQ(count_sends<RaftRequestVote>(e), 4u);
  const Term t = rs[1].term();
  rs[1].on_message(2, RaftVote{t, true}, ctx);
  EXPECT_EQ(rs[1].role(), Role::Candidate); // 2 of 3
  rs[1].on_message(3, RaftVote{t, false}, ctx);
  EXPECT_EQ(rs[1].role(), Role::Candidate);
  rs[1].on_message(4, RaftVote{t, true}, ctx);
  EXPECT_EQ(rs[1].role(), Role::Leader);
}

TEST(Raft, LeaderCrashElectsSuccessor) {
  Scenario s = fault_free(Protocol::Raft, 5, 50);
  s.workload.interval_ms = 20;
  s.faults.crashes.push_back({0, 300});
  const auto r = run_scenario(s).report;
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(r.committed_requests, 50u);
  ASSERT_GE(r.leader_history.size(), 2u);
  EXPECT_NE(r.leader_history.back().node, 0u);
}

TEST(Raft, CrashFaultsNeverBreakAgreement) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Scenario s = fault_free(Protocol::Raft, 5, 30);
    s.seed = seed;
    s.workload.interval_ms = 20;
    s.faults.crashes = {{0, 200}, {static_cast<NodeId>(1 + seed % 4), 400}};
    const auto r = run_scenario(s).report;
    EXPECT_TRUE(r.violations.empty()) << "seed " << seed << ": " << r.violations.front().detail;
  }
}

TEST(Raft, SingleByzantineLeaderBreaksAgreement) {
  // Plain Raft has no defence against an equivocating leader: the odd
  // followers commit forged entries at the same indices.
  bool found = false;
  for (std::uint64_t seed = 1; seed <= 5 && !found; ++seed) {
    Scenario s = fault_free(Protocol::Raft, 5, 20);
    s.seed = seed;
    s.faults.byzantine.push_back({0, Strategy::Equivocate});
    found = has_violation(run_scenario(s).report, "AGREEMENT");
  }
  EXPECT_TRUE(found);
}

TEST(Pbft, MessagesPerBatchFormula) {
  for (std::size_t n : {4u, 7u, 13u}) {
    const auto r = run_scenario(fault_free(Protocol::Pbft, n, 100)).report;
    EXPECT_TRUE(r.violations.empty());
    EXPECT_EQ(r.committed_requests, 100u);
    EXPECT_DOUBLE_EQ(r.messages_per_commit, double((n - 1) + 2 * n * (n - 1))) << "n=" << n;
  }
}

TEST(Pbft, PrepareQuorumGuard) {
  std::vector<PbftReplica> rs;
  for (NodeId i = 0; i < 4; ++i) rs.emplace_back(i, 4);
  std::mt19937_64 rng(3);
  Context ctx{0, rng, shared_crypto()};
  rs[0].on_client({1, {1, 2, 3}}, ctx);
  auto flushed = rs[0].on_timer(TimerKind::BatchFlush, ctx);
  const PrePrepare *pp = first_send<PrePrepare>(flushed);
  ASSERT_NE(pp, nullptr);
  auto e1 = rs[1].on_message(0, *pp, ctx); // only its own prepare so far
  EXPECT_EQ(count_sends<PbftCommit>(e1), 0u);
  auto e2 = rs[1].on_message(0, Prepare{0, pp->seq, pp->digest}, ctx);
  EXPECT_EQ(count_sends<PbftCommit>(e2), 0u) << "2f prepares must not commit";
  auto e3 = rs[1].on_message(2, Prepare{0, pp->seq, pp->digest}, ctx);
  EXPECT_EQ(count_sends<PbftCommit>(e3), 3u);
  EXPECT_TRUE(rs[1].log().empty());
  rs[1].on_message(0, PbftCommit{0, pp->seq, pp->digest}, ctx);
  EXPECT_TRUE(rs[1].log().empty());
  rs[1].on_message(2, PbftCommit{0, pp->seq, pp->digest}, ctx);
  EXPECT_EQ(rs[1].log().commit_index(), 1u);
}

TEST(Pbft, PrePrepareFromBackupIgnored) {
  std::vector<PbftReplica> rs;
  for (NodeId i = 0; i < 4; ++i) rs.emplace_back(i, 4);
  std::mt19937_64 rng(3);
  Context ctx{0, rng, shared_crypto()};
  std::vector<LogEntry> entries{{1, 1, 9, {7}}};
  auto e = rs[1].on_message(2, PrePrepare{0, 1, batch_digest(entries), entries}, ctx);
  EXPECT_TRUE(e.sends.empty());
  auto bad = rs[1].on_message(0, PrePrepare{0, 1, Digest{}, entries}, ctx);
  EXPECT_TRUE(bad.sends.empty()) << "digest must match the batch";
}

TEST(Compare, RaftMatchesMraftPattern) {
  Scenario tmpl = fault_free(Protocol::MRaft, 5, 100);
  const auto rows = compare({Protocol::MRaft, Protocol::Raft, Protocol::Pbft}, {1, 3}, tmpl);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto &r : rows) {
    EXPECT_EQ(r.violations, 0u);
    if (r.protocol == Protocol::Pbft)
      EXPECT_DOUBLE_EQ(r.messages_per_commit, double((r.n - 1) + 2 * r.n * (r.n - 1)));
    else
      EXPECT_DOUBLE_EQ(r.messages_per_commit, 3.0 * (r.n - 1));
  }
}
