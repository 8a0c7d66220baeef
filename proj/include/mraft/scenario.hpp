#pragma once

// Scenario description: cluster, network, workload and faults. Loaded from
// JSON with strict validation; every error names the offending field path.

#include "mraft/adversary.hpp"
#include "mraft/latency.hpp"
#include "mraft/mraft.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace mraft {

enum class Protocol { MRaft, Raft, Pbft };

inline const char *protocol_name(Protocol p) {
  switch (p) {
  case Protocol::MRaft: return "mraft";
  case Protocol::Raft: return "raft";
  case Protocol::Pbft: return "pbft";
  }
  return "?";
}

/// Cluster size each protocol needs to tolerate f faults.
inline std::size_t protocol_n(Protocol p, std::size_t f) {
  switch (p) {
  case Protocol::MRaft: return 3 * f + 2;
  case Protocol::Raft: return 2 * f + 1;
  case Protocol::Pbft: return 3 * f + 1;
  }
  return 0;
}

struct LatencySpec {
  std::string kind = "table1"; // table1 | uniform | matrix
  Table1Mode mode = Table1Mode::Rtt;
  double ms = 5.0;
  std::vector<std::vector<double>> matrix;

  LatencyModel build(std::size_t n) const {
    if (kind == "table1") return LatencyModel::table1(n, mode);
    if (kind == "uniform") return LatencyModel::uniform(n, ms);
    auto m = LatencyModel::matrix(matrix);
    if (m.size() != n) throw ConfigError("latency.matrix: must be " + std::to_string(n) + "x" + std::to_string(n));
    return m;
  }
};

struct WorkloadSpec {
  std::size_t count = 100;
  SimTime start_ms = 0;
  SimTime interval_ms = 1;
  std::optional<std::size_t> random_bytes; // payload override; default is a 32-byte digest
  SimTime retry_ms = 1000;
};

struct Scenario {
  std::string name = "unnamed";
  Protocol protocol = Protocol::MRaft;
  std::size_t n = 5;
  std::vector<bool> tee; // MRaft only; empty selects the first f+1 nodes
  LatencySpec latency;
  double jitter_ms = 1.0;
  SimTime gst = 0;
  double pre_gst_extra_ms = 0;
  MRaftOptions mraft;
  bool sign_messages = true;
  WorkloadSpec workload;
  FaultSchedule faults;
  std::uint64_t seed = 1;
  SimTime until_ms = 60000;
  bool stop_when_committed = true;
  std::optional<std::size_t> max_batches;

  std::size_t f() const {
    switch (protocol) {
    case Protocol::MRaft: return (n - 2) / 3;
    case Protocol::Raft: return (n - 1) / 2;
    case Protocol::Pbft: return (n - 1) / 3;
    }
    return 0;
  }

  std::vector<bool> tee_flags() const {
    if (protocol != Protocol::MRaft) return std::vector<bool>(n, false);
    if (!tee.empty()) return tee;
    std::vector<bool> t(n, false);
    for (std::size_t i = 0; i <= f() && i < n; ++i) t[i] = true;
    return t;
  }

  /// Throws ConfigError naming the field when the scenario is unusable.
  void validate() const {
    switch (protocol) {
    case Protocol::MRaft:
      if (n < 2 || (n - 2) % 3 != 0)
        throw ConfigError("n: " + std::to_string(n) + "-2 not divisible by 3 (mraft needs n = 3f+2)");
      break;
    case Protocol::Pbft:
      if (n < 1 || (n - 1) % 3 != 0) throw ConfigError("n: pbft needs n = 3f+1, got " + std::to_string(n));
      break;
    case Protocol::Raft:
      if (n < 1) throw ConfigError("n: must be positive");
      break;
    }
    if (!tee.empty()) {
      if (protocol != Protocol::MRaft) throw ConfigError("tee: only meaningful for mraft");
      if (tee.size() != n) throw ConfigError("tee: length must equal n");
    }
    const auto t = tee_flags();
    if (protocol == Protocol::MRaft) {
      const auto cnt = static_cast<std::size_t>(std::count(t.begin(), t.end(), true));
      if (cnt < f() + 1) throw ConfigError("tee: need at least f+1=" + std::to_string(f() + 1) + " TEE nodes");
      if (mraft.election_quorum > n) throw ConfigError("election_quorum: larger than n");
      if (mraft.bootstrap_leader && *mraft.bootstrap_leader >= n)
        throw ConfigError("bootstrap_leader: out of range");
      if (mraft.tee_timeout_lo <= 0 || mraft.tee_timeout_hi <= mraft.tee_timeout_lo)
        throw ConfigError("timeouts.tee: need 0 < lo < hi");
      if (mraft.non_tee_timeout_lo <= 0 || mraft.non_tee_timeout_hi <= mraft.non_tee_timeout_lo)
        throw ConfigError("timeouts.non_tee: need 0 < lo < hi");
    } else if (mraft.bootstrap_leader && *mraft.bootstrap_leader >= n) {
      throw ConfigError("bootstrap_leader: out of range");
    }
    if (mraft.heartbeat_interval <= 0) throw ConfigError("timeouts.heartbeat_ms: must be positive");
    if (mraft.check_quorum_ms < 0) throw ConfigError("timeouts.check_quorum_ms: negative");
    if (mraft.batch_max_bytes == 0) throw ConfigError("batch.max_bytes: must be positive");
    if (mraft.batch_flush_ms < 0) throw ConfigError("batch.flush_ms: negative");
    if (jitter_ms < 0) throw ConfigError("jitter_ms: negative");
    if (pre_gst_extra_ms < 0) throw ConfigError("gst.max_extra_delay_ms: negative");
    if (workload.interval_ms < 0) throw ConfigError("workload.interval_ms: negative");
    if (workload.start_ms < 0) throw ConfigError("workload.start_ms: negative");
    if (workload.retry_ms <= 0) throw ConfigError("workload.retry_ms: must be positive");
    if (until_ms < 0) throw ConfigError("until_ms: negative");
    latency.build(n);
    faults.validate(t, f());
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

// Literals built in code are signed; parsed files give unsigned.
inline bool non_negative_integer(const nlohmann::json &v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

using nlohmann::json;

class Reader {
public:
  Reader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  /// Rejects keys the schema does not know.
  void only(std::initializer_list<const char *> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char *k : keys) ok = ok || it.key() == k;
      if (!ok) throw ConfigError(sub(it.key()) + ": unknown field");
    }
  }

  bool has(const char *k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json &at(const char *k) const { return j_.at(k); }
  std::string sub(const std::string &k) const { return path_.empty() ? k : path_ + "." + k; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  template <class T>
  void get(const char *k, T &out) const {
    if (!has(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception &) {
      throw ConfigError(sub(k) + ": wrong type");
    }
  }

  double number(const char *k, double dflt) const {
    if (!has(k)) return dflt;
    if (!j_.at(k).is_number()) throw ConfigError(sub(k) + ": expected a number");
    return j_.at(k).get<double>();
  }

  std::size_t count(const char *k, std::size_t dflt) const {
    if (!has(k)) return dflt;
    if (!non_negative_integer(j_.at(k))) throw ConfigError(sub(k) + ": expected a non-negative integer");
    return j_.at(k).get<std::size_t>();
  }

private:
  const json &j_;
  std::string path_;
};

inline std::pair<SimTime, SimTime> read_interval(const json &j, const std::string &path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(path + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<NodeId> read_nodes(const json &j, const std::string &path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of node ids");
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_unsigned()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a node id");
    out.push_back(j[i].get<NodeId>());
  }
  return out;
}

} // namespace detail

inline Scenario scenario_from_json(const nlohmann::json &j) {
  using detail::Reader;
  Scenario s;
  Reader r(j, "");
  r.only({"name", "protocol", "n", "f", "tee", "n_tee", "latency", "jitter_ms", "gst", "timeouts", "batch",
          "non_tee_leader", "election_quorum", "up_to_date_rule", "bootstrap_leader", "sign_messages", "workload",
          "faults", "cosi", "seed", "until_ms", "stop_when_committed", "max_batches"});
  r.get("name", s.name);
  if (r.has("protocol")) {
    std::string p;
    r.get("protocol", p);
    if (p == "mraft") s.protocol = Protocol::MRaft;
    else if (p == "raft") s.protocol = Protocol::Raft;
    else if (p == "pbft") s.protocol = Protocol::Pbft;
    else throw ConfigError("protocol: unknown protocol '" + p + "'");
  }
  if (r.has("n") && r.has("f")) throw ConfigError("n: give either n or f, not both");
  if (r.has("f")) s.n = protocol_n(s.protocol, r.count("f", 1));
  s.n = r.count("n", s.n);
  if (r.has("tee") && r.has("n_tee")) throw ConfigError("tee: give either tee or n_tee, not both");
  if (r.has("tee")) {
    const auto &t = r.at("tee");
    if (!t.is_array()) throw ConfigError("tee: expected an array of booleans");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!t[i].is_boolean()) throw ConfigError("tee[" + std::to_string(i) + "]: expected a boolean");
      s.tee.push_back(t[i].get<bool>());
    }
  }
  if (r.has("n_tee")) {
    const std::size_t k = r.count("n_tee", 0);
    if (k > s.n) throw ConfigError("n_tee: larger than n");
    s.tee.assign(s.n, false);
    for (std::size_t i = 0; i < k; ++i) s.tee[i] = true;
  }
  if (r.has("latency")) {
    Reader l(r.at("latency"), "latency");
    l.only({"kind", "mode", "ms", "matrix"});
    l.get("kind", s.latency.kind);
    if (s.latency.kind != "table1" && s.latency.kind != "uniform" && s.latency.kind != "matrix")
      throw ConfigError("latency.kind: expected table1, uniform or matrix");
    if (l.has("mode")) {
      std::string m;
      l.get("mode", m);
      if (m == "rtt") s.latency.mode = Table1Mode::Rtt;
      else if (m == "one_way") s.latency.mode = Table1Mode::OneWay;
      else throw ConfigError("latency.mode: expected rtt or one_way");
    }
    s.latency.ms = l.number("ms", s.latency.ms);
    l.get("matrix", s.latency.matrix);
    if (s.latency.kind == "matrix" && s.latency.matrix.empty()) throw ConfigError("latency.matrix: required");
  }
  s.jitter_ms = r.number("jitter_ms", s.jitter_ms);
  if (r.has("gst")) {
    Reader g(r.at("gst"), "gst");
    g.only({"at", "max_extra_delay_ms"});
    s.gst = g.number("at", 0);
    s.pre_gst_extra_ms = g.number("max_extra_delay_ms", 0);
  }
  auto &o = s.mraft;
  if (r.has("timeouts")) {
    Reader t(r.at("timeouts"), "timeouts");
    t.only({"tee", "non_tee", "heartbeat_ms", "fetch_backoff_ms", "check_quorum_ms", "candidate_backoff_max"});
    if (t.has("tee")) std::tie(o.tee_timeout_lo, o.tee_timeout_hi) = detail::read_interval(t.at("tee"), "timeouts.tee");
    if (t.has("non_tee"))
      std::tie(o.non_tee_timeout_lo, o.non_tee_timeout_hi) = detail::read_interval(t.at("non_tee"), "timeouts.non_tee");
    o.heartbeat_interval = t.number("heartbeat_ms", o.heartbeat_interval);
    o.fetch_backoff = t.number("fetch_backoff_ms", o.fetch_backoff);
    o.check_quorum_ms = t.number("check_quorum_ms", o.check_quorum_ms);
    o.candidate_backoff_max = static_cast<unsigned>(t.count("candidate_backoff_max", o.candidate_backoff_max));
  }
  if (r.has("batch")) {
    Reader b(r.at("batch"), "batch");
    b.only({"max_bytes", "flush_ms"});
    o.batch_max_bytes = b.count("max_bytes", o.batch_max_bytes);
    o.batch_flush_ms = b.number("flush_ms", o.batch_flush_ms);
  }
  if (r.has("non_tee_leader")) {
    std::string m;
    r.get("non_tee_leader", m);
    if (m == "cosi") o.non_tee_leader = NonTeeLeaderMode::Cosi;
    else if (m == "idle_wait") o.non_tee_leader = NonTeeLeaderMode::IdleWait;
    else throw ConfigError("non_tee_leader: expected cosi or idle_wait");
  }
  o.election_quorum = r.count("election_quorum", 0);
  if (r.has("up_to_date_rule")) {
    std::string m;
    r.get("up_to_date_rule", m);
    if (m == "term_then_index") o.up_to_date = UpToDateRule::TermThenIndex;
    else if (m == "index_only") o.up_to_date = UpToDateRule::IndexOnly;
    else throw ConfigError("up_to_date_rule: expected term_then_index or index_only");
  }
  if (j.contains("bootstrap_leader")) {
    if (j.at("bootstrap_leader").is_null()) o.bootstrap_leader.reset();
    else o.bootstrap_leader = static_cast<NodeId>(r.count("bootstrap_leader", 0));
  }
  r.get("sign_messages", s.sign_messages);
  if (r.has("cosi")) {
    Reader c(r.at("cosi"), "cosi");
    c.only({"round_timeout_ms", "grace_ms"});
    o.cosi_round_timeout = c.number("round_timeout_ms", o.cosi_round_timeout);
    o.cosi_grace = c.number("grace_ms", o.cosi_grace);
  }
  if (r.has("workload")) {
    Reader w(r.at("workload"), "workload");
    w.only({"count", "start_ms", "interval_ms", "random_bytes", "retry_ms"});
    s.workload.count = w.count("count", s.workload.count);
    s.workload.start_ms = w.number("start_ms", s.workload.start_ms);
    s.workload.interval_ms = w.number("interval_ms", s.workload.interval_ms);
    if (w.has("random_bytes")) s.workload.random_bytes = w.count("random_bytes", 0);
    s.workload.retry_ms = w.number("retry_ms", s.workload.retry_ms);
  }
  if (r.has("faults")) {
    Reader fr(r.at("faults"), "faults");
    fr.only({"crashes", "partitions", "byzantine"});
    auto arr = [&](const char *k) -> const nlohmann::json & {
      const auto &a = fr.at(k);
      if (!a.is_array()) throw ConfigError(fr.sub(k) + ": expected an array");
      return a;
    };
    if (fr.has("crashes")) {
      const auto &a = arr("crashes");
      for (std::size_t i = 0; i < a.size(); ++i) {
        Reader c(a[i], "faults.crashes[" + std::to_string(i) + "]");
        c.only({"node", "at"});
        if (!c.has("node")) throw ConfigError(c.sub("node") + ": required");
        s.faults.crashes.push_back({static_cast<NodeId>(c.count("node", 0)), c.number("at", 0)});
      }
    }
    if (fr.has("partitions")) {
      const auto &a = arr("partitions");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string path = "faults.partitions[" + std::to_string(i) + "]";
        Reader p(a[i], path);
        p.only({"groups", "at", "until"});
        PartitionFault pf;
        if (!p.has("groups") || !p.at("groups").is_array()) throw ConfigError(path + ".groups: required array");
        const auto &g = p.at("groups");
        for (std::size_t k = 0; k < g.size(); ++k)
          pf.groups.push_back(detail::read_nodes(g[k], path + ".groups[" + std::to_string(k) + "]"));
        pf.at = p.number("at", 0);
        if (p.has("until")) pf.until = p.number("until", 0);
        s.faults.partitions.push_back(std::move(pf));
      }
    }
    if (fr.has("byzantine")) {
      const auto &a = arr("byzantine");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string path = "faults.byzantine[" + std::to_string(i) + "]";
        Reader b(a[i], path);
        b.only({"node", "strategy"});
        if (!b.has("node")) throw ConfigError(path + ".node: required");
        std::string st;
        b.get("strategy", st);
        try {
          s.faults.byzantine.push_back({static_cast<NodeId>(b.count("node", 0)), strategy_from(st)});
        } catch (const ConfigError &e) {
          throw ConfigError(path + ".strategy: " + e.what());
        }
      }
    }
  }
  if (r.has("seed")) {
    if (!detail::non_negative_integer(r.at("seed"))) throw ConfigError("seed: expected a non-negative integer");
    s.seed = r.at("seed").get<std::uint64_t>();
  }
  s.until_ms = r.number("until_ms", s.until_ms);
  r.get("stop_when_committed", s.stop_when_committed);
  if (r.has("max_batches")) s.max_batches = r.count("max_batches", 0);
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

/// Full echo with every default filled in; reloading it gives the same scenario.
inline nlohmann::ordered_json scenario_to_json(const Scenario &s) {
  nlohmann::ordered_json j;
  const auto &o = s.mraft;
  j["name"] = s.name;
  j["protocol"] = protocol_name(s.protocol);
  j["n"] = s.n;
  j["tee"] = s.tee_flags();
  nlohmann::ordered_json lat;
  lat["kind"] = s.latency.kind;
  if (s.latency.kind == "table1") lat["mode"] = s.latency.mode == Table1Mode::Rtt ? "rtt" : "one_way";
  if (s.latency.kind == "uniform") lat["ms"] = s.latency.ms;
  if (s.latency.kind == "matrix") lat["matrix"] = s.latency.matrix;
  j["latency"] = lat;
  j["jitter_ms"] = s.jitter_ms;
  j["gst"] = {{"at", s.gst}, {"max_extra_delay_ms", s.pre_gst_extra_ms}};
  j["timeouts"] = {{"tee", {o.tee_timeout_lo, o.tee_timeout_hi}},
                   {"non_tee", {o.non_tee_timeout_lo, o.non_tee_timeout_hi}},
                   {"heartbeat_ms", o.heartbeat_interval},
                   {"fetch_backoff_ms", o.fetch_backoff},
                   {"check_quorum_ms", o.check_quorum_ms},
                   {"candidate_backoff_max", o.candidate_backoff_max}};
  j["batch"] = {{"max_bytes", o.batch_max_bytes}, {"flush_ms", o.batch_flush_ms}};
  j["non_tee_leader"] = o.non_tee_leader == NonTeeLeaderMode::Cosi ? "cosi" : "idle_wait";
  j["election_quorum"] = o.election_quorum ? nlohmann::ordered_json(o.election_quorum) : nlohmann::ordered_json();
  j["up_to_date_rule"] = o.up_to_date == UpToDateRule::TermThenIndex ? "term_then_index" : "index_only";
  j["bootstrap_leader"] = o.bootstrap_leader ? nlohmann::ordered_json(*o.bootstrap_leader) : nlohmann::ordered_json();
  j["sign_messages"] = s.sign_messages;
  j["cosi"] = {{"round_timeout_ms", o.cosi_round_timeout}, {"grace_ms", o.cosi_grace}};
  nlohmann::ordered_json w;
  w["count"] = s.workload.count;
  w["start_ms"] = s.workload.start_ms;
  w["interval_ms"] = s.workload.interval_ms;
  w["random_bytes"] = s.workload.random_bytes ? nlohmann::ordered_json(*s.workload.random_bytes) : nlohmann::ordered_json();
  w["retry_ms"] = s.workload.retry_ms;
  j["workload"] = w;
  nlohmann::ordered_json f;
  f["crashes"] = nlohmann::ordered_json::array();
  for (const auto &c : s.faults.crashes) f["crashes"].push_back({{"node", c.node}, {"at", c.at}});
  f["partitions"] = nlohmann::ordered_json::array();
  for (const auto &p : s.faults.partitions) {
    nlohmann::ordered_json pj{{"groups", p.groups}, {"at", p.at}};
    if (p.until) pj["until"] = *p.until;
    f["partitions"].push_back(pj);
  }
  f["byzantine"] = nlohmann::ordered_json::array();
  for (const auto &b : s.faults.byzantine) f["byzantine"].push_back({{"node", b.node}, {"strategy", strategy_name(b.strategy)}});
  j["faults"] = f;
  j["seed"] = s.seed;
  j["until_ms"] = s.until_ms;
  j["stop_when_committed"] = s.stop_when_committed;
  j["max_batches"] = s.max_batches ? nlohmann::ordered_json(*s.max_batches) : nlohmann::ordered_json();
  return j;
}

// ---------------------------------------------------------------------------
// Canned adversarial scenarios

inline const std::vector<std::string> &canned_names() {
  static const std::vector<std::string> names = {
      "leader_crash", "equivocating_follower", "equivocating_leader", "double_vote", "stale_lie",
      "digest_corrupt", "mute", "partition_heal", "entry_loss_ablation"};
  return names;
}

/// Short adversarial runs on a uniform 5 ms network. The first f+1 nodes are
/// TEE-capable; Byzantine nodes are taken from the tail.
inline Scenario canned_scenario(const std::string &name, std::size_t f, std::uint64_t seed = 1) {
  Scenario s;
  s.name = name;
  s.protocol = Protocol::MRaft;
  s.n = 3 * f + 2;
  s.latency.kind = "uniform";
  s.latency.ms = 5;
  s.seed = seed;
  s.until_ms = 2500;
  s.stop_when_committed = false;
  s.workload.count = 20;
  s.workload.start_ms = 50;
  s.workload.interval_ms = 25;
  const NodeId n = static_cast<NodeId>(s.n);
  auto tail = [&](Strategy st, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) s.faults.byzantine.push_back({static_cast<NodeId>(n - 1 - i), st});
  };
  std::vector<NodeId> tee_group, rest;
  for (NodeId i = 0; i < n; ++i) (i <= f ? tee_group : rest).push_back(i);

  if (name == "leader_crash") {
    s.faults.crashes.push_back({0, 300});
  } else if (name == "equivocating_follower") {
    s.mraft.bootstrap_leader.reset();
    tail(Strategy::Equivocate, f);
  } else if (name == "equivocating_leader") {
    // An honest-looking non-TEE bootstrap leader that forks its announces.
    s.mraft.bootstrap_leader = static_cast<NodeId>(f + 1);
    s.faults.byzantine.push_back({static_cast<NodeId>(f + 1), Strategy::Equivocate});
  } else if (name == "double_vote") {
    s.mraft.bootstrap_leader.reset();
    tail(Strategy::DoubleVote, f);
    s.faults.partitions.push_back({{tee_group, rest}, 400, 900});
  } else if (name == "stale_lie") {
    s.mraft.bootstrap_leader.reset();
    tail(Strategy::StaleLie, f);
    s.faults.partitions.push_back({{tee_group, rest}, 400, 900});
  } else if (name == "digest_corrupt") {
    // Honest non-TEE leader, so both the ack path (after any TEE takeover)
    // and the CoSi path meet corrupted material.
    s.mraft.bootstrap_leader = static_cast<NodeId>(f + 1);
    tail(Strategy::DigestCorrupt, f);
  } else if (name == "mute") {
    tail(Strategy::Mute, f);
  } else if (name == "partition_heal") {
    std::vector<NodeId> others;
    for (NodeId i = 1; i < n; ++i) others.push_back(i);
    s.faults.partitions.push_back({{{0}, others}, 300, 1200});
  } else if (name == "entry_loss_ablation") {
    if (f != 1) throw ConfigError("entry_loss_ablation: defined for f=1 only");
    s.tee = {true, false, false, false, true};
    s.faults.byzantine.push_back({1, Strategy::DoubleVote});
    s.faults.partitions.push_back({{{0, 1, 2}, {3, 4}}, 100, 160});
    s.faults.partitions.push_back({{{0}, {1, 2, 3, 4}}, 160, std::nullopt});
    s.workload.start_ms = 100;
    s.workload.interval_ms = 5;
    s.workload.count = 10;
    s.until_ms = 2000;
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  s.validate();
  return s;
}

} // namespace mraft
