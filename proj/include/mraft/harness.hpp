#pragma once

// Runs a scenario end to end: builds the world for the chosen protocol,
// drives the client workload, checks the trace and extracts metrics.

#include "mraft/checkers.hpp"
#include "mraft/mraft.hpp"
#include "mraft/pbft.hpp"
#include "mraft/raft.hpp"
#include "mraft/scenario.hpp"
#include "mraft/simnet.hpp"
#include "mraft/workload.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

namespace mraft {

struct LatencyStats {
  std::size_t count = 0;
  double mean = 0;
  double median = 0;
  double p99 = 0;
};

/// Nearest-rank percentiles.
inline LatencyStats latency_stats(std::vector<double> v) {
  LatencyStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  auto rank = [&](double p) {
    auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(k, 1, v.size()) - 1];
  };
  s.median = rank(0.5);
  s.p99 = rank(0.99);
  return s;
}

struct LeaderRecord {
  SimTime t = 0;
  Term term = 0;
  NodeId node = 0;
  bool tee = false;
  bool bootstrap = false;
};

struct BatchRecord {
  SimTime t = 0;
  NodeId node = 0;
  Term term = 0;
  std::size_t count = 0;
};

struct MetricsReport {
  Scenario scenario;
  std::size_t requests = 0;
  std::size_t committed_requests = 0; // committed at every honest live node
  std::size_t committed_batches = 0;
  LatencyStats leader_latency; // acceptance at the leader to commit there
  LatencyStats global_latency; // acceptance to commit at every honest live node
  std::uint64_t messages_total = 0;
  std::uint64_t messages_replication = 0;
  std::uint64_t messages_election = 0;
  std::uint64_t messages_maintenance = 0;
  double messages_per_commit = 0;
  std::size_t elections = 0;
  std::vector<LeaderRecord> leader_history;
  std::vector<BatchRecord> batches;
  std::size_t evidence = 0;
  std::vector<Violation> violations;
  std::string trace_digest;
  SimTime end_time = 0;
  double throughput_rps = 0;

  nlohmann::ordered_json to_json() const {
    auto lat = [](const LatencyStats &s) {
      return nlohmann::ordered_json{{"count", s.count}, {"mean_ms", s.mean}, {"median_ms", s.median}, {"p99_ms", s.p99}};
    };
    nlohmann::ordered_json j;
    j["scenario"] = scenario_to_json(scenario);
    j["seed"] = scenario.seed;
    j["requests"] = requests;
    j["committed_requests"] = committed_requests;
    j["committed_batches"] = committed_batches;
    j["leader_commit_latency"] = lat(leader_latency);
    j["global_commit_latency"] = lat(global_latency);
    j["messages_total"] = messages_total;
    j["messages_by_class"] = {{"replication", messages_replication},
                              {"election", messages_election},
                              {"maintenance", messages_maintenance}};
    j["messages_per_commit"] = messages_per_commit;
    j["elections"] = elections;
    auto hist = nlohmann::ordered_json::array();
    for (const auto &l : leader_history)
      hist.push_back({{"t", l.t}, {"term", l.term}, {"node", l.node}, {"tee", l.tee}, {"bootstrap", l.bootstrap}});
    j["leader_history"] = hist;
    j["evidence_records"] = evidence;
    auto vs = nlohmann::ordered_json::array();
    for (const auto &v : violations) vs.push_back({{"kind", v.kind}, {"t", v.t}, {"detail", v.detail}});
    j["violations"] = vs;
    j["trace_digest"] = trace_digest;
    j["end_time_ms"] = end_time;
    j["throughput_rps"] = throughput_rps;
    return j;
  }
};

struct RunResult {
  MetricsReport report;
  Trace trace;
};

/// Process-wide group and memo tables; signatures repeat heavily across seeds.
inline const crypto::CryptoContext &shared_crypto() {
  static const crypto::CryptoContext cc(crypto::GroupParams::sim256());
  return cc;
}

inline std::shared_ptr<const Keyring> shared_keyring(const std::vector<bool> &tee) {
  static std::mutex mu;
  static std::map<std::vector<bool>, std::shared_ptr<const Keyring>> cache;
  std::lock_guard lock(mu);
  auto &slot = cache[tee];
  if (!slot) {
    ClusterConfig cfg{QuorumParams{tee.size(), 0, 0, 0}, tee};
    slot = std::make_shared<const Keyring>(Keyring::generate(shared_crypto().group(), cfg));
  }
  return slot;
}

namespace detail {

template <Replica R>
RunResult drive(const Scenario &sc, std::vector<R> replicas, TraceHeader header, std::shared_ptr<const Keyring> keys) {
  const std::size_t n = sc.n;
  const auto tee = sc.tee_flags();
  NetworkOptions net{sc.latency.build(n), sc.jitter_ms, sc.gst, sc.pre_gst_extra_ms,
                     sc.sign_messages && sc.protocol == Protocol::MRaft};
  World<R> world(std::move(replicas), tee, std::move(net), sc.faults, std::move(keys), shared_crypto(), sc.seed,
                 std::move(header));

  const auto workload = generate_workload(sc.workload.count, sc.workload.start_ms, sc.workload.interval_ms,
                                          sc.workload.random_bytes, sc.seed);
  const std::size_t count = workload.size();
  std::vector<bool> honest(n, true);
  for (const auto &b : sc.faults.byzantine) honest[b.node] = false;

  MetricsReport rep;
  rep.scenario = sc;
  rep.requests = count;

  // Per-request bookkeeping; index = id - 1.
  std::vector<SimTime> accepted_at(count, -1);
  std::vector<std::optional<NodeId>> accepted_by(count);
  std::vector<bool> committed_any(count, false);
  std::vector<std::vector<SimTime>> commit_at(n, std::vector<SimTime>(count, -1));
  std::vector<std::size_t> node_committed(n, 0);
  std::vector<double> leader_lat;

  auto pick_leader = [&]() -> std::optional<NodeId> {
    std::optional<NodeId> best;
    for (NodeId i = 0; i < n; ++i) {
      if (world.crashed(i) || world.replica(i).role() != Role::Leader) continue;
      if (!best || world.replica(i).term() > world.replica(*best).term()) best = i;
    }
    return best;
  };

  std::function<void(std::size_t)> try_submit = [&](std::size_t k) {
    if (committed_any[k]) return;
    auto target = pick_leader();
    if (!target) {
      world.schedule(world.now() + 10, [&, k] { try_submit(k); });
      return;
    }
    world.submit(*target, workload[k].request);
  };

  world.hooks.client = [&](NodeId node, const ClientOutcome &o, SimTime now) {
    if (o.id == 0 || o.id > count) return;
    const std::size_t k = o.id - 1;
    switch (o.status) {
    case ClientStatus::Accepted:
      accepted_at[k] = now;
      accepted_by[k] = node;
      world.schedule(now + sc.workload.retry_ms, [&, k] { try_submit(k); });
      break;
    case ClientStatus::Duplicate: world.schedule(now + sc.workload.retry_ms, [&, k] { try_submit(k); }); break;
    case ClientStatus::NotLeader: world.schedule(now + 10, [&, k] { try_submit(k); }); break;
    }
  };

  world.hooks.log = [&](NodeId node, const LogEvent &ev, SimTime now) {
    if (ev.kind != LogEvent::Kind::Commit || ev.request_id == 0 || ev.request_id > count) return;
    const std::size_t k = ev.request_id - 1;
    if (commit_at[node][k] >= 0) return;
    commit_at[node][k] = now;
    if (!honest[node]) return;
    ++node_committed[node];
    committed_any[k] = true;
    if (accepted_by[k] == node && accepted_at[k] >= 0) leader_lat.push_back(now - accepted_at[k]);
  };

  world.hooks.note = [&](NodeId node, const Note &note, SimTime now) {
    if (note.kind == Note::Kind::Role && note.text == "leader") {
      const bool boot = now == 0 && note.term <= 1;
      rep.leader_history.push_back({now, note.term, node, static_cast<bool>(tee[node]), boot});
      if (!boot) ++rep.elections;
    } else if (note.kind == Note::Kind::Batch) {
      rep.committed_batches += note.count;
      rep.batches.push_back({now, node, note.term, note.count});
    } else if (note.kind == Note::Kind::Evidence) {
      ++rep.evidence;
    }
  };

  for (std::size_t k = 0; k < count; ++k) world.schedule(workload[k].at, [&, k] { try_submit(k); });

  auto all_committed = [&] {
    if (count == 0) return false;
    for (NodeId i = 0; i < n; ++i)
      if (honest[i] && !world.crashed(i) && node_committed[i] < count) return false;
    return true;
  };
  auto stop = [&] {
    if (sc.stop_when_committed && all_committed()) return true;
    return sc.max_batches && rep.committed_batches >= *sc.max_batches;
  };
  world.run_until(sc.until_ms, stop);

  rep.end_time = world.now();
  const auto &tr = world.traffic();
  rep.messages_total = tr.total;
  rep.messages_replication = tr.by_class[static_cast<std::size_t>(MessageClass::Replication)];
  rep.messages_election = tr.by_class[static_cast<std::size_t>(MessageClass::Election)];
  rep.messages_maintenance = tr.by_class[static_cast<std::size_t>(MessageClass::Maintenance)];
  rep.messages_per_commit =
      rep.committed_batches ? static_cast<double>(rep.messages_replication) / static_cast<double>(rep.committed_batches)
                            : 0.0;

  std::vector<double> global_lat;
  for (std::size_t k = 0; k < count; ++k) {
    SimTime last = -1;
    bool everywhere = true;
    for (NodeId i = 0; i < n && everywhere; ++i) {
      if (!honest[i] || world.crashed(i)) continue;
      if (commit_at[i][k] < 0) everywhere = false;
      last = std::max(last, commit_at[i][k]);
    }
    if (!everywhere) continue;
    ++rep.committed_requests;
    if (accepted_at[k] >= 0) global_lat.push_back(last - accepted_at[k]);
  }
  rep.leader_latency = latency_stats(std::move(leader_lat));
  rep.global_latency = latency_stats(std::move(global_lat));
  rep.throughput_rps = rep.end_time > 0 ? static_cast<double>(rep.committed_requests) / (rep.end_time / 1000.0) : 0;

  RunResult out;
  out.trace = world.take_trace();
  rep.violations = check_trace(out.trace);
  rep.trace_digest = to_hex(out.trace.digest());
  out.report = std::move(rep);
  return out;
}

} // namespace detail

inline RunResult run_scenario(const Scenario &sc) {
  sc.validate();
  const auto tee = sc.tee_flags();
  TraceHeader h;
  h.protocol = protocol_name(sc.protocol);
  h.n = sc.n;
  h.tee = tee;
  h.byzantine = sc.faults.byzantine_nodes();
  h.seed = sc.seed;
  switch (sc.protocol) {
  case Protocol::MRaft: {
    auto cfg = ClusterConfig::make(tee);
    auto keys = shared_keyring(tee);
    std::vector<MRaftReplica> rs;
    for (NodeId i = 0; i < sc.n; ++i) {
      rs.emplace_back(i, cfg, keys, sc.mraft);
      if (sc.faults.strategy_of(i) == Strategy::StaleLie) rs.back().set_misbehavior({kStaleLieInflation});
    }
    h.q_rep = cfg.q_rep();
    h.q_elec = rs.front().election_quorum();
    return detail::drive(sc, std::move(rs), std::move(h), keys);
  }
  case Protocol::Raft: {
    RaftOptions o;
    o.timeout_lo = sc.mraft.tee_timeout_lo;
    o.timeout_hi = sc.mraft.tee_timeout_hi;
    o.heartbeat_interval = sc.mraft.heartbeat_interval;
    o.batch_max_bytes = sc.mraft.batch_max_bytes;
    o.batch_flush_ms = sc.mraft.batch_flush_ms;
    o.bootstrap_leader = sc.mraft.bootstrap_leader;
    std::vector<RaftReplica> rs;
    for (NodeId i = 0; i < sc.n; ++i) rs.emplace_back(i, sc.n, o);
    h.q_elec = raft_quorum(sc.n);
    return detail::drive(sc, std::move(rs), std::move(h), shared_keyring(tee));
  }
  case Protocol::Pbft: {
    PbftOptions o;
    o.batch_max_bytes = sc.mraft.batch_max_bytes;
    o.batch_flush_ms = sc.mraft.batch_flush_ms;
    o.primary = sc.mraft.bootstrap_leader.value_or(0);
    std::vector<PbftReplica> rs;
    for (NodeId i = 0; i < sc.n; ++i) rs.emplace_back(i, sc.n, o);
    h.q_elec = pbft_params(sc.n).quorum;
    return detail::drive(sc, std::move(rs), std::move(h), shared_keyring(tee));
  }
  }
  throw ConfigError("protocol: unsupported");
}

// ---------------------------------------------------------------------------
// Protocol comparison

struct CompareRow {
  Protocol protocol;
  std::size_t f = 0;
  std::size_t n = 0;
  double messages_per_commit = 0;
  double mean_latency = 0;
  std::size_t violations = 0;
};

/// One fault-free run per (protocol, f) using the template's network and
/// workload, with n derived from f per protocol.
inline std::vector<CompareRow> compare(const std::vector<Protocol> &protocols, const std::vector<std::size_t> &fs,
                                       const Scenario &tmpl) {
  std::vector<CompareRow> rows;
  for (Protocol p : protocols)
    for (std::size_t f : fs) {
      Scenario s = tmpl;
      s.protocol = p;
      s.n = protocol_n(p, f);
      s.tee.clear();
      s.faults = {};
      if (s.latency.kind == "matrix") throw ConfigError("compare: template latency must not be an explicit matrix");
      auto r = run_scenario(s).report;
      rows.push_back({p, f, s.n, r.messages_per_commit, r.leader_latency.mean, r.violations.size()});
    }
  return rows;
}

inline std::string compare_csv(const std::vector<CompareRow> &rows) {
  std::ostringstream os;
  os << "protocol,f,n,messages_per_commit,mean_commit_latency_ms\n";
  for (const auto &r : rows)
    os << protocol_name(r.protocol) << ',' << r.f << ',' << r.n << ',' << r.messages_per_commit << ','
       << r.mean_latency << '\n';
  return os.str();
}

} // namespace mraft
