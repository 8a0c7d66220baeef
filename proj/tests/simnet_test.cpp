#include "mraft/checkers.hpp"
#include "mraft/harness.hpp"
#include "mraft/simnet.hpp"

#include <gtest/gtest.h>

using namespace mraft;

namespace {

/// Scriptable replica: a start script, and a record of what arrived.
struct Toy {
  NodeId id_ = 0;
  ReplicatedLog log_;
  std::function<Effects(Toy &, Context &)> script;
  std::vector<std::pair<SimTime, Term>> got;
  std::vector<SimTime> fired;

  NodeId id() const { return id_; }
  Role role() const { return Role::Follower; }
  Term term() const { return 0; }
  const ReplicatedLog &log() const { return log_; }
  Effects start(Context &ctx) { return script ? script(*this, ctx) : Effects{}; }
  Effects on_message(NodeId, const Message &m, Context &ctx) {
    if (auto *h = std::get_if<HeartBeat>(&m)) got.emplace_back(ctx.now, h->term);
    return {};
  }
  Effects on_timer(TimerKind, Context &ctx) {
    fired.push_back(ctx.now);
    return {};
  }
  Effects on_client(const ClientRequest &, Context &) { return {}; }
};
static_assert(Replica<Toy>);

NetworkOptions plain_net(LatencyModel lat, double jitter = 0) {
  NetworkOptions net;
  net.latency = std::move(lat);
  net.jitter_ms = jitter;
  net.sign_non_tee = false;
  return net;
}

struct ToyWorld {
  std::unique_ptr<World<Toy>> w;

  ToyWorld(std::size_t n, std::function<Effects(Toy &, Context &)> node0, NetworkOptions net, FaultSchedule faults = {},
           std::uint64_t seed = 1) {
    std::vector<Toy> rs(n);
    for (NodeId i = 0; i < n; ++i) rs[i].id_ = i;
    rs[0].script = std::move(node0);
    TraceHeader h;
    h.protocol = "toy";
    h.n = n;
    h.tee.assign(n, true);
    w = std::make_unique<World<Toy>>(std::move(rs), std::vector<bool>(n, true), std::move(net), std::move(faults),
                                     nullptr, shared_crypto(), seed, h);
  }
};

Effects burst_to_1(Context &, int count) {
  Effects e;
  for (int k = 1; k <= count; ++k) e.send(1, make_message(HeartBeat{static_cast<Term>(k), 0, 0, Digest{}, {}}));
  return e;
}

std::size_t count_kind(const Trace &t, RecordKind k) {
  std::size_t n = 0;
  for (const auto &r : t.records) n += r.kind == k;
  return n;
}

Scenario small_mraft(std::size_t requests = 50) {
  Scenario s;
  s.latency.kind = "uniform";
  s.latency.ms = 5;
  s.workload.count = requests;
  s.workload.interval_ms = 5;
  return s;
}

} // namespace

TEST(World, EqualTimesRunInInsertionOrder) {
  ToyWorld tw(2, {}, plain_net(LatencyModel::uniform(2, 1)));
  std::vector<int> order;
  tw.w->schedule(10, [&] { order.push_back(3); });
  tw.w->schedule(10, [&] { order.push_back(7); });
  tw.w->schedule(5, [&] { order.push_back(1); });
  tw.w->run_until(100);
  EXPECT_EQ(order, (std::vector<int>{1, 3, 7}));
}

TEST(World, Table1EastUsToSoutheastAsia) {
  // Node 0 is East US, node 4 Southeast Asia.
  auto to4 = [](Toy &, Context &) {
    Effects e;
    e.send(4, make_message(HeartBeat{1, 0, 0, Digest{}, {}}));
    return e;
  };
  ToyWorld one_way(5, to4, plain_net(LatencyModel::table1(5, Table1Mode::OneWay)));
  one_way.w->run_until(1000);
  ASSERT_EQ(one_way.w->replica(4).got.size(), 1u);
  EXPECT_DOUBLE_EQ(one_way.w->replica(4).got[0].first, 219.86);

  ToyWorld rtt(5, to4, plain_net(LatencyModel::table1(5, Table1Mode::Rtt), 1.0));
  rtt.w->run_until(1000);
  ASSERT_EQ(rtt.w->replica(4).got.size(), 1u);
  EXPECT_GE(rtt.w->replica(4).got[0].first, 219.86 / 2);
  EXPECT_LT(rtt.w->replica(4).got[0].first, 219.86 / 2 + 1);
}

TEST(World, RegionsRoundRobin) {
  const auto lat = LatencyModel::table1(10, Table1Mode::OneWay);
  EXPECT_DOUBLE_EQ(lat.delay(0, 1), 27.89);
  EXPECT_DOUBLE_EQ(lat.delay(0, 5), 1.71); // both East US
  EXPECT_DOUBLE_EQ(lat.delay(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(lat.delay(5, 9), 219.86);
}

TEST(World, LinksAreFifo) {
  auto script = [](Toy &, Context &c) { return burst_to_1(c, 50); };
  ToyWorld tw(2, script, plain_net(LatencyModel::uniform(2, 5), 20.0));
  tw.w->run_until(1000);
  const auto &got = tw.w->replica(1).got;
  ASSERT_EQ(got.size(), 50u);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].second, i + 1);
}

TEST(World, CrashedTargetDrops) {
  auto script = [](Toy &, Context &c) { return burst_to_1(c, 1); };
  FaultSchedule f;
  f.crashes.push_back({1, 1});
  ToyWorld tw(2, script, plain_net(LatencyModel::uniform(2, 5)), f);
  tw.w->run_until(100);
  EXPECT_TRUE(tw.w->replica(1).got.empty());
  EXPECT_TRUE(tw.w->crashed(1));
  const auto &t = tw.w->trace();
  ASSERT_EQ(count_kind(t, RecordKind::Drop), 1u);
  for (const auto &r : t.records)
    if (r.kind == RecordKind::Drop) {
      EXPECT_NE(r.note.find("crashed"), std::string::npos);
    }
}

TEST(World, PartitionDropsAcrossGroupsOnly) {
  auto script = [](Toy &, Context &) {
    Effects e;
    for (NodeId to : {1u, 2u}) e.send(to, make_message(HeartBeat{1, 0, 0, Digest{}, {}}));
    return e;
  };
  FaultSchedule f;
  f.partitions.push_back({{{0, 1}}, 0, 50});
  ToyWorld tw(3, script, plain_net(LatencyModel::uniform(3, 5)), f);
  tw.w->run_until(100);
  EXPECT_EQ(tw.w->replica(1).got.size(), 1u);
  EXPECT_TRUE(tw.w->replica(2).got.empty()); // node 2 is in the implicit group
  EXPECT_EQ(count_kind(tw.w->trace(), RecordKind::Drop), 1u);
}

TEST(World, HealedPartitionDelivers) {
  FaultSchedule f;
  f.partitions.push_back({{{0}, {1}}, 0, 4});
  auto script = [](Toy &, Context &c) { return burst_to_1(c, 1); };
  ToyWorld tw(2, script, plain_net(LatencyModel::uniform(2, 5)), f);
  tw.w->run_until(100);
  EXPECT_EQ(tw.w->replica(1).got.size(), 1u); // delivered at t=5, after the heal
}

TEST(World, TimerRearmAndCancel) {
  auto script = [](Toy &, Context &) {
    Effects e;
    e.arm(TimerKind::Retry, 10);
    e.arm(TimerKind::Retry, 20); // replaces the first
    e.arm(TimerKind::Heartbeat, 15);
    e.cancel(TimerKind::Heartbeat);
    e.cancel(TimerKind::Election); // nothing pending: no-op
    return e;
  };
  ToyWorld tw(1, script, plain_net(LatencyModel::uniform(1, 1)));
  tw.w->run_until(100);
  EXPECT_EQ(tw.w->replica(0).fired, (std::vector<SimTime>{20}));
}

TEST(World, ZeroLengthRunHasEmptyTrace) {
  auto script = [](Toy &, Context &c) { return burst_to_1(c, 3); };
  ToyWorld tw(2, script, plain_net(LatencyModel::uniform(2, 5)));
  tw.w->run_until(0);
  EXPECT_TRUE(tw.w->trace().records.empty());

  Scenario s = small_mraft();
  s.until_ms = 0;
  const auto r = run_scenario(s);
  EXPECT_TRUE(r.trace.records.empty());
  EXPECT_TRUE(r.report.violations.empty());
}

TEST(World, SharedRngGivesDistinctDraws) {
  std::mt19937_64 rng(5);
  const double a = uniform(rng, 150, 300), b = uniform(rng, 150, 300);
  EXPECT_NE(a, b);
}

TEST(Determinism, SameSeedSameDigest) {
  Scenario s = canned_scenario("leader_crash", 1, 42);
  const auto a = run_scenario(s), b = run_scenario(s);
  EXPECT_EQ(a.report.trace_digest, b.report.trace_digest);
  EXPECT_EQ(a.trace.records.size(), b.trace.records.size());
  s.seed = 43;
  EXPECT_NE(run_scenario(s).report.trace_digest, a.report.trace_digest);
}

TEST(Determinism, ToyJitterDependsOnSeed) {
  auto script = [](Toy &, Context &c) { return burst_to_1(c, 5); };
  ToyWorld a(2, script, plain_net(LatencyModel::uniform(2, 5), 1.0), {}, 1);
  ToyWorld b(2, script, plain_net(LatencyModel::uniform(2, 5), 1.0), {}, 1);
  ToyWorld c(2, script, plain_net(LatencyModel::uniform(2, 5), 1.0), {}, 2);
  a.w->run_until(100);
  b.w->run_until(100);
  c.w->run_until(100);
  EXPECT_EQ(a.w->trace().digest(), b.w->trace().digest());
  EXPECT_NE(a.w->trace().digest(), c.w->trace().digest());
}

TEST(Invariants, ClockMonotoneAndNoSpontaneousMessages) {
  const auto r = run_scenario(canned_scenario("partition_heal", 1, 3));
  SimTime last = 0;
  std::set<std::string> sent;
  for (const auto &rec : r.trace.records) {
    EXPECT_GE(rec.t, last);
    last = rec.t;
    if (rec.kind == RecordKind::Send) sent.insert(rec.note);
    if (rec.kind == RecordKind::Deliver) {
      EXPECT_TRUE(sent.count(rec.note)) << rec.note;
    }
  }
  EXPECT_TRUE(r.report.violations.empty());
}

TEST(Run, StopsAfterBatchCount) {
  Scenario s = small_mraft(1000);
  s.workload.interval_ms = 10;
  s.max_batches = 100;
  const auto r = run_scenario(s).report;
  EXPECT_EQ(r.committed_batches, 100u);
  EXPECT_TRUE(r.violations.empty());
}

TEST(Run, IdleClusterHoldsNoElections) {
  Scenario s = small_mraft(0);
  s.until_ms = 10000;
  const auto r = run_scenario(s).report;
  EXPECT_EQ(r.elections, 0u);
  EXPECT_EQ(r.leader_history.size(), 1u);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_GT(r.messages_maintenance, 0u);
}

TEST(Run, CrashedLeaderTriggersElection) {
  Scenario s = small_mraft(0);
  s.until_ms = 3000;
  s.faults.crashes.push_back({0, 500});
  const auto r = run_scenario(s).report;
  EXPECT_GE(r.elections, 1u);
  EXPECT_NE(r.leader_history.back().node, 0u);
}

TEST(Signing, NonTeeMessagesVerified) {
  const auto r = run_scenario(small_mraft(20));
  std::size_t unsigned_drops = 0;
  for (const auto &rec : r.trace.records)
    if (rec.kind == RecordKind::Drop && rec.note.find("unsigned") != std::string::npos) ++unsigned_drops;
  EXPECT_EQ(unsigned_drops, 0u);
  EXPECT_EQ(r.report.committed_requests, 20u);
}
