#pragma once

// Shared domain types: node identity, cluster parameters, quorum arithmetic
// and the replicated log.

#include "mraft/encoding.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mraft {

using NodeId = std::uint32_t;
using Term = std::uint64_t;
using LogIndex = std::uint64_t;
using RequestId = std::uint64_t;
using SimTime = double; // simulated milliseconds

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct QuorumParams {
  std::size_t n = 0;
  std::size_t f = 0;
  std::size_t q_rep = 0;
  std::size_t q_elec = 0;

  bool operator==(const QuorumParams &) const = default;
};

/// Cluster sizing for the mixed fault model. Only n = 3f + 2 is accepted;
/// anything else is a configuration error rather than a silently floored f.
inline QuorumParams derive_params(std::size_t n) {
  if (n < 2 || (n - 2) % 3 != 0)
    throw ConfigError("n=" + std::to_string(n) + ": n-2 not divisible by 3 (need n = 3f+2)");
  const std::size_t f = (n - 2) / 3;
  return {n, f, 2 * f + 1, 2 * f + 2};
}

/// Smallest possible overlap of two quorums of size q in a universe of n.
inline std::size_t election_quorum_intersection(std::size_t n, std::size_t q_elec) {
  if (q_elec > n) throw ConfigError("quorum larger than cluster");
  return 2 * q_elec > n ? 2 * q_elec - n : 0;
}

struct LogPosition {
  Term last_term = 0;
  LogIndex last_index = 0;

  bool operator==(const LogPosition &) const = default;
};

/// True iff a is at least as up-to-date as b: higher last term wins, equal
/// terms compare by index. Equality counts.
inline bool is_more_up_to_date(LogPosition a, LogPosition b) {
  if (a.last_term != b.last_term) return a.last_term > b.last_term;
  return a.last_index >= b.last_index;
}

/// Literal index-only comparison, kept for the ablation switch.
inline bool is_more_up_to_date_index_only(LogPosition a, LogPosition b) {
  return a.last_index >= b.last_index;
}

enum class UpToDateRule { TermThenIndex, IndexOnly };

inline bool up_to_date(UpToDateRule rule, LogPosition a, LogPosition b) {
  return rule == UpToDateRule::TermThenIndex ? is_more_up_to_date(a, b)
                                             : is_more_up_to_date_index_only(a, b);
}

struct ClusterConfig {
  QuorumParams quorum;
  std::vector<bool> tee;

  std::size_t n() const { return quorum.n; }
  std::size_t f() const { return quorum.f; }
  std::size_t q_rep() const { return quorum.q_rep; }
  std::size_t q_elec() const { return quorum.q_elec; }
  std::size_t n_tee() const { return static_cast<std::size_t>(std::count(tee.begin(), tee.end(), true)); }
  bool is_tee(NodeId id) const { return id < tee.size() && tee[id]; }

  /// Validates n = 3f+2 and n_tee >= f+1.
  static ClusterConfig make(std::vector<bool> tee) {
    ClusterConfig cfg{derive_params(tee.size()), std::move(tee)};
    if (cfg.n_tee() < cfg.f() + 1)
      throw ConfigError("n_tee=" + std::to_string(cfg.n_tee()) + " below f+1=" +
                        std::to_string(cfg.f() + 1));
    return cfg;
  }

  /// First k nodes TEE-capable.
  static ClusterConfig with_tee_prefix(std::size_t n, std::size_t k) {
    std::vector<bool> tee(n, false);
    for (std::size_t i = 0; i < std::min(n, k); ++i) tee[i] = true;
    return make(std::move(tee));
  }
};

struct LogEntry {
  Term term = 0;
  LogIndex index = 0;
  RequestId request_id = 0; // 0 marks a leader no-op
  Bytes payload;

  bool operator==(const LogEntry &) const = default;
};

/// Digest of an entry chained onto its predecessor's digest. Equal digests
/// at index i imply equal logs on the whole prefix 1..i.
inline Digest chain_digest(const Digest &prev, const LogEntry &e) {
  ByteWriter w;
  w.digest(prev).u64(e.term).u64(e.index).u64(e.request_id).digest(sha256(e.payload));
  return sha256(w.data());
}

class LogError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// 1-based log with a chained digest per entry and a monotone commit index.
/// Index 0 is the empty-log sentinel (term 0, zero digest).
class ReplicatedLog {
public:
  LogIndex last_index() const { return entries_.size(); }
  Term last_term() const { return entries_.empty() ? 0 : entries_.back().term; }
  LogPosition position() const { return {last_term(), last_index()}; }
  LogIndex commit_index() const { return commit_; }
  bool empty() const { return entries_.empty(); }

  const LogEntry &at(LogIndex i) const {
    if (i == 0 || i > entries_.size()) throw LogError("log index out of range");
    return entries_[i - 1];
  }
  Term term_at(LogIndex i) const { return i == 0 ? 0 : at(i).term; }
  const Digest &digest_at(LogIndex i) const {
    static const Digest kZero{};
    if (i == 0) return kZero;
    if (i > digests_.size()) throw LogError("log index out of range");
    return digests_[i - 1];
  }

  /// Digest the entry would have if placed after index e.index-1 of this log.
  Digest digest_if_appended(const LogEntry &e) const { return chain_digest(digest_at(e.index - 1), e); }

  void append(LogEntry e) {
    if (e.index != last_index() + 1) throw LogError("append: non-contiguous index");
    if (e.term < last_term()) throw LogError("append: term regression");
    digests_.push_back(chain_digest(digest_at(e.index - 1), e));
    if (e.request_id != 0) by_request_[e.request_id] = e.index;
    entries_.push_back(std::move(e));
  }

  /// Drops entries from index i onward. The committed prefix is immutable.
  void truncate_from(LogIndex i) {
    if (i <= commit_) throw LogError("truncate: would rewrite committed prefix");
    while (entries_.size() >= i) {
      by_request_.erase(entries_.back().request_id);
      entries_.pop_back();
      digests_.pop_back();
    }
  }

  void commit_to(LogIndex i) {
    if (i > last_index()) throw LogError("commit beyond log end");
    commit_ = std::max(commit_, i);
  }

  std::optional<LogIndex> find_request(RequestId id) const {
    auto it = by_request_.find(id);
    if (it == by_request_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<LogEntry> slice(LogIndex from, LogIndex to) const {
    std::vector<LogEntry> out;
    for (LogIndex i = std::max<LogIndex>(from, 1); i <= std::min(to, last_index()); ++i)
      out.push_back(entries_[i - 1]);
    return out;
  }

  const std::vector<LogEntry> &entries() const { return entries_; }

private:
  std::vector<LogEntry> entries_;
  std::vector<Digest> digests_;
  std::unordered_map<RequestId, LogIndex> by_request_;
  LogIndex commit_ = 0;
};

} // namespace mraft
