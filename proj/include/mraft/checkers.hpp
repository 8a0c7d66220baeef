#pragma once

// Safety checkers over a trace. They rebuild each node's log from append
// and truncate records, so they judge what nodes actually held.

#include "mraft/trace.hpp"

#include <map>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mraft {

struct Violation {
  std::string kind; // AGREEMENT, DURABILITY, ELECTION SAFETY, CERT SOUNDNESS, TEE NON-EQUIVOCATION, ...
  SimTime t = 0;
  std::string detail;
};

namespace detail {

inline std::string note_kind(const std::string &note) {
  auto sp = note.find(' ');
  return sp == std::string::npos ? note : note.substr(0, sp);
}

inline std::optional<std::uint64_t> note_msg_id(const std::string &note) {
  auto hash = note.find('#');
  if (hash == std::string::npos) return std::nullopt;
  std::uint64_t v = 0;
  auto end = note.c_str() + note.size();
  auto res = std::from_chars(note.c_str() + hash + 1, end, v);
  if (res.ec != std::errc{}) return std::nullopt;
  return v;
}

} // namespace detail

class TraceChecker {
public:
  explicit TraceChecker(TraceHeader h) : h_(std::move(h)), logs_(h_.n) {
    byz_.insert(h_.byzantine.begin(), h_.byzantine.end());
  }

  void feed(const TraceRecord &r) {
    if (r.t < last_t_) add("CLOCK", r.t, "time went backwards");
    last_t_ = r.t;
    switch (r.kind) {
    case RecordKind::Append: on_append(r); break;
    case RecordKind::Truncate: truncate(node(r), r.index); break;
    case RecordKind::Commit: on_commit(r); break;
    case RecordKind::Role: on_role(r); break;
    case RecordKind::Send: on_send(r); break;
    case RecordKind::Deliver: on_deliver(r); break;
    case RecordKind::Proof: on_proof(r); break;
    default: break;
    }
  }

  const std::vector<Violation> &violations() const { return out_; }

private:
  // Each log slot keeps its write history tagged with the node's log version,
  // so "digest at idx as of version v" stays answerable after truncation.
  struct NodeLog {
    std::uint64_t version = 0;
    LogIndex size = 0;
    std::vector<std::vector<std::pair<std::uint64_t, Digest>>> slots;

    const Digest *at(LogIndex idx, std::uint64_t as_of) const {
      if (idx == 0 || idx > slots.size()) return nullptr;
      const auto &h = slots[idx - 1];
      for (auto it = h.rbegin(); it != h.rend(); ++it)
        if (it->first <= as_of) return &it->second;
      return nullptr;
    }
    const Digest *current(LogIndex idx) const { return idx <= size ? at(idx, version) : nullptr; }
  };

  struct Support {
    NodeId node;
    std::uint64_t version;
    LogIndex len;
  };

  NodeId node(const TraceRecord &r) const {
    if (r.from < 0 || static_cast<std::size_t>(r.from) >= h_.n) throw std::invalid_argument("trace: bad node id");
    return static_cast<NodeId>(r.from);
  }
  bool honest(NodeId n) const { return !byz_.count(n); }

  void add(const char *kind, SimTime t, std::string detail) { out_.push_back({kind, t, std::move(detail)}); }

  void truncate(NodeId n, LogIndex from) {
    auto &l = logs_[n];
    if (from == 0 || from > l.size) return;
    l.size = from - 1;
    ++l.version;
  }

  void on_append(const TraceRecord &r) {
    const NodeId n = node(r);
    if (!r.digest || r.index == 0) return;
    auto &l = logs_[n];
    if (r.index <= l.size) truncate(n, r.index);
    if (r.index != l.size + 1)
      add("TRACE", r.t, "node " + std::to_string(n) + " appended out of order at " + std::to_string(r.index));
    ++l.version;
    if (l.slots.size() < r.index) l.slots.resize(r.index);
    l.slots[r.index - 1].emplace_back(l.version, *r.digest);
    l.size = r.index;
  }

  void on_commit(const TraceRecord &r) {
    const NodeId n = node(r);
    if (!honest(n) || !r.digest) return;
    auto [it, fresh] = committed_.emplace(r.index, *r.digest);
    if (!fresh && it->second != *r.digest)
      add("AGREEMENT", r.t,
          "index " + std::to_string(r.index) + " committed with two digests (node " + std::to_string(n) + ")");
    max_committed_ = std::max(max_committed_, r.index);
  }

  void on_role(const TraceRecord &r) {
    if (r.note != "leader") return;
    const NodeId n = node(r);
    auto &ls = leaders_[r.term];
    ls.insert(n);
    if (ls.size() > 1) add("ELECTION SAFETY", r.t, "two leaders in term " + std::to_string(r.term));
    if (!honest(n) || max_committed_ == 0) return;
    const Digest *have = logs_[n].current(max_committed_);
    if (!have || *have != committed_.at(max_committed_))
      add("DURABILITY", r.t,
          "leader " + std::to_string(n) + " of term " + std::to_string(r.term) + " lacks committed index " +
              std::to_string(max_committed_));
  }

  void on_send(const TraceRecord &r) {
    const NodeId n = node(r);
    if (auto id = detail::note_msg_id(r.note)) sent_.insert(*id);
    const std::string kind = detail::note_kind(r.note);
    if (kind == "Ack" || kind == "CoSiResponse") {
      const LogIndex len = std::min<LogIndex>(r.index, logs_[n].size);
      supports_[r.term].push_back({n, logs_[n].version, len});
    }
    if (n < h_.tee.size() && h_.tee[n] && r.digest &&
        (kind == "Append" || kind == "Cert" || kind == "CoSiAnnounce" || kind == "CoSig")) {
      auto [it, fresh] = statements_.emplace(std::make_tuple(n, r.term, r.index), *r.digest);
      if (!fresh && it->second != *r.digest)
        add("TEE NON-EQUIVOCATION", r.t,
            "TEE node " + std::to_string(n) + " issued two digests for term " + std::to_string(r.term) +
                " index " + std::to_string(r.index));
    }
  }

  void on_deliver(const TraceRecord &r) {
    auto id = detail::note_msg_id(r.note);
    if (!id || !sent_.count(*id)) add("SPONTANEOUS", r.t, "delivery without a send: " + r.note);
  }

  /// Distinct nodes other than `skip` that vouched for (idx, d) in `term`;
  /// stops counting at `enough`.
  std::size_t support_count(Term term, LogIndex idx, const Digest &d, NodeId skip, std::size_t enough) const {
    std::set<NodeId> nodes;
    auto it = supports_.find(term);
    if (it == supports_.end()) return 0;
    for (auto sit = it->second.rbegin(); sit != it->second.rend() && nodes.size() < enough; ++sit) {
      const auto &s = *sit;
      if (s.node == skip || nodes.count(s.node)) continue;
      if (s.len < idx) continue;
      const Digest *have = logs_[s.node].at(idx, s.version);
      if (have && *have == d) nodes.insert(s.node);
    }
    return nodes.size();
  }

  void on_proof(const TraceRecord &r) {
    if (h_.q_rep == 0 || !r.digest || r.index == 0) return;
    const NodeId n = node(r);
    if (!honest(n)) return;
    const bool cert = r.note == "cert" || r.note == "cert-issued";
    const auto issuer = static_cast<NodeId>(r.to);
    const auto key = std::make_tuple(issuer, r.term, r.index, *r.digest);
    if (r.note == "cert-issued") {
      const Digest *have = logs_[n].current(r.index);
      if (have && *have == *r.digest) issued_.insert(key);
    }
    const std::size_t implicit = cert && issued_.count(key) ? 1 : 0;
    const std::size_t count = implicit + support_count(r.term, r.index, *r.digest, issuer, h_.q_rep - implicit);
    if (count < h_.q_rep)
      add("CERT SOUNDNESS", r.t,
          r.note + " for term " + std::to_string(r.term) + " index " + std::to_string(r.index) + " has " +
              std::to_string(count) + " supporters, need " + std::to_string(h_.q_rep));
  }

  TraceHeader h_;
  std::unordered_set<NodeId> byz_;
  std::vector<NodeLog> logs_;
  std::map<LogIndex, Digest> committed_;
  LogIndex max_committed_ = 0;
  std::map<Term, std::set<NodeId>> leaders_;
  std::unordered_set<std::uint64_t> sent_;
  std::map<Term, std::vector<Support>> supports_;
  std::map<std::tuple<NodeId, Term, LogIndex>, Digest> statements_;
  std::set<std::tuple<NodeId, Term, LogIndex, Digest>> issued_;
  SimTime last_t_ = -std::numeric_limits<SimTime>::infinity();
  std::vector<Violation> out_;
};

inline std::vector<Violation> check_trace(const Trace &t) {
  TraceChecker c(t.header);
  for (const auto &r : t.records) c.feed(r);
  return c.violations();
}

} // namespace mraft
