#pragma once

// Fault schedules and Byzantine strategies. Crashes and Byzantine nodes
// count toward f; partitions are network events and do not.

#include "mraft/core.hpp"
#include "mraft/crypto.hpp"
#include "mraft/message.hpp"
#include "mraft/replica.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mraft {

enum class Strategy { Equivocate, DoubleVote, StaleLie, DigestCorrupt, Mute };

inline const char *strategy_name(Strategy s) {
  switch (s) {
  case Strategy::Equivocate: return "equivocate";
  case Strategy::DoubleVote: return "double_vote";
  case Strategy::StaleLie: return "stale_lie";
  case Strategy::DigestCorrupt: return "digest_corrupt";
  case Strategy::Mute: return "mute";
  }
  return "?";
}

inline Strategy strategy_from(const std::string &s) {
  for (auto k : {Strategy::Equivocate, Strategy::DoubleVote, Strategy::StaleLie, Strategy::DigestCorrupt,
                 Strategy::Mute})
    if (s == strategy_name(k)) return k;
  throw ConfigError("unknown strategy '" + s + "'");
}

/// Claim inflation a StaleLie node applies when it stands for election.
inline constexpr LogIndex kStaleLieInflation = 100;

struct CrashFault {
  NodeId node = 0;
  SimTime at = 0;
};

struct PartitionFault {
  std::vector<std::vector<NodeId>> groups; // unlisted nodes form one extra group
  SimTime at = 0;
  std::optional<SimTime> until;
};

struct ByzantineFault {
  NodeId node = 0;
  Strategy strategy = Strategy::Mute;
};

struct FaultSchedule {
  std::vector<CrashFault> crashes;
  std::vector<PartitionFault> partitions;
  std::vector<ByzantineFault> byzantine;

  /// Throws ConfigError on ids out of range, Byzantine TEE nodes, overlapping
  /// partition groups, or more than f distinct faulty nodes.
  void validate(const std::vector<bool> &tee, std::size_t f) const {
    const std::size_t n = tee.size();
    std::set<NodeId> faulty;
    for (std::size_t i = 0; i < crashes.size(); ++i) {
      const auto &c = crashes[i];
      if (c.node >= n) throw ConfigError("faults.crashes[" + std::to_string(i) + "].node: out of range");
      if (c.at < 0) throw ConfigError("faults.crashes[" + std::to_string(i) + "].at: negative time");
      faulty.insert(c.node);
    }
    std::set<NodeId> byz;
    for (std::size_t i = 0; i < byzantine.size(); ++i) {
      const auto &b = byzantine[i];
      const std::string path = "faults.byzantine[" + std::to_string(i) + "]";
      if (b.node >= n) throw ConfigError(path + ".node: out of range");
      if (tee[b.node]) throw ConfigError(path + ".node: TEE nodes cannot be Byzantine");
      if (!byz.insert(b.node).second) throw ConfigError(path + ".node: listed twice");
      faulty.insert(b.node);
    }
    if (faulty.size() > f)
      throw ConfigError("faults: " + std::to_string(faulty.size()) + " faulty nodes exceed f=" + std::to_string(f));
    for (std::size_t i = 0; i < partitions.size(); ++i) {
      const auto &p = partitions[i];
      const std::string path = "faults.partitions[" + std::to_string(i) + "]";
      std::set<NodeId> seen;
      for (const auto &g : p.groups)
        for (NodeId x : g) {
          if (x >= n) throw ConfigError(path + ".groups: node out of range");
          if (!seen.insert(x).second) throw ConfigError(path + ".groups: node in two groups");
        }
      if (p.until && *p.until < p.at) throw ConfigError(path + ".until: before at");
    }
  }

  std::optional<Strategy> strategy_of(NodeId id) const {
    for (const auto &b : byzantine)
      if (b.node == id) return b.strategy;
    return std::nullopt;
  }

  std::vector<NodeId> byzantine_nodes() const {
    std::vector<NodeId> out;
    for (const auto &b : byzantine) out.push_back(b.node);
    return out;
  }

  bool separated(NodeId a, NodeId b, SimTime t) const {
    for (const auto &p : partitions) {
      if (t < p.at || (p.until && t >= *p.until)) continue;
      if (group_of(p, a) != group_of(p, b)) return true;
    }
    return false;
  }

private:
  static std::size_t group_of(const PartitionFault &p, NodeId x) {
    for (std::size_t g = 0; g < p.groups.size(); ++g)
      for (NodeId y : p.groups[g])
        if (y == x) return g;
    return p.groups.size();
  }
};

struct Tamper {
  NodeId to;
  std::string what;
};

namespace detail {

inline std::vector<LogEntry> forge_entries(const std::vector<LogEntry> &entries) {
  std::vector<LogEntry> out = entries;
  for (auto &e : out) {
    Digest d = sha256(e.payload);
    e.payload.assign(d.begin(), d.end());
    e.payload.push_back(0xee);
  }
  return out;
}

} // namespace detail

/// Rewrites a Byzantine node's outbound messages. Returns the messages to
/// actually send; `log` receives one entry per rewrite or drop.
inline std::vector<Outbound> tamper_outbound(Strategy s, std::vector<Outbound> sends, const crypto::GroupParams &grp,
                                             std::vector<Tamper> &log) {
  if (s == Strategy::Mute) {
    for (const auto &o : sends) log.push_back({o.to, std::string("mute ") + kind_name(*o.body)});
    return {};
  }
  std::map<const Message *, MessagePtr> forged; // one forgery per original, shared by recipients
  auto rewrite = [&](Outbound &o, auto make) {
    auto it = forged.find(o.body.get());
    if (it == forged.end()) it = forged.emplace(o.body.get(), make()).first;
    if (!it->second) return;
    log.push_back({o.to, std::string(strategy_name(s)) + " " + kind_name(*o.body)});
    o.body = it->second;
  };
  for (auto &o : sends) {
    const Message &m = *o.body;
    if (s == Strategy::Equivocate && o.to % 2 == 1) {
      if (auto *a = std::get_if<Append>(&m); a && !a->entries.empty()) {
        rewrite(o, [&] {
          Append f = *a;
          f.entries = detail::forge_entries(a->entries);
          return make_message(std::move(f));
        });
      } else if (auto *c = std::get_if<CoSiAnnounce>(&m); c && !c->entries.empty()) {
        rewrite(o, [&] {
          CoSiAnnounce f = *c;
          f.entries = detail::forge_entries(c->entries);
          return make_message(std::move(f));
        });
      } else if (auto *r = std::get_if<RaftAppend>(&m); r && !r->entries.empty()) {
        rewrite(o, [&] {
          RaftAppend f = *r;
          f.entries = detail::forge_entries(r->entries);
          return make_message(std::move(f));
        });
      } else if (auto *v = std::get_if<RequestVote>(&m)) {
        rewrite(o, [&] {
          RequestVote f = *v;
          f.last_log_index += 1;
          return make_message(f);
        });
      }
    } else if (s == Strategy::DigestCorrupt) {
      if (auto *a = std::get_if<Ack>(&m); a && !a->heartbeat_reply) {
        rewrite(o, [&] {
          Ack f = *a;
          f.digest[0] ^= 0xff;
          return make_message(f);
        });
      } else if (auto *r = std::get_if<CoSiResponse>(&m)) {
        rewrite(o, [&] {
          CoSiResponse f = *r;
          f.response = (f.response + 1) % grp.q;
          return make_message(f);
        });
      }
    } else if (s == Strategy::StaleLie) {
      if (auto *v = std::get_if<RaftRequestVote>(&m)) {
        rewrite(o, [&] {
          RaftRequestVote f = *v;
          f.last_log_index += kStaleLieInflation;
          f.last_log_term = f.term;
          return make_message(f);
        });
      }
    }
  }
  return sends;
}

/// Extra messages a Byzantine node emits on receipt. A DoubleVote node
/// votes for every candidate that asks, term after term.
inline std::vector<Outbound> inbound_reaction(Strategy s, NodeId self, NodeId from, const Message &m,
                                              const Keyring *keys, const crypto::CryptoContext &cc) {
  std::vector<Outbound> out;
  if (s != Strategy::DoubleVote) return out;
  if (auto *rv = std::get_if<RequestVote>(&m); rv && keys && rv->candidate == from) {
    VoteRecord v{rv->new_term, self, from, rv->claim(), {}};
    v.sig = cc.sign(keys->identity[self].sk, vote_statement(v.term, self, from, v.claim));
    out.push_back({from, make_message(Vote{v})});
  } else if (auto *r = std::get_if<RaftRequestVote>(&m)) {
    out.push_back({from, make_message(RaftVote{r->term, true})});
  }
  return out;
}

} // namespace mraft
