#pragma once

// Plain Raft baseline on the shared transport: majority quorums, an
// explicit commit broadcast after each quorum, no signatures.

#include "mraft/core.hpp"
#include "mraft/message.hpp"
#include "mraft/replica.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <unordered_set>
#include <vector>

namespace mraft {

struct RaftOptions {
  SimTime timeout_lo = 150;
  SimTime timeout_hi = 300;
  SimTime heartbeat_interval = 50;
  std::size_t batch_max_bytes = 20480;
  SimTime batch_flush_ms = 5;
  std::optional<NodeId> bootstrap_leader = NodeId{0};
};

inline std::size_t raft_quorum(std::size_t n) { return n / 2 + 1; }

class RaftReplica {
public:
  RaftReplica(NodeId id, std::size_t n, RaftOptions opt = {})
      : id_(id), n_(n), opt_(opt), next_(n, 1), match_(n, 0), last_sent_(n, -kInf) {
    if (n == 0 || id >= n) throw ConfigError("raft: bad node id or size");
  }

  NodeId id() const { return id_; }
  Role role() const { return role_; }
  Term term() const { return term_; }
  const ReplicatedLog &log() const { return log_; }
  std::optional<NodeId> leader() const { return leader_; }
  std::size_t quorum() const { return raft_quorum(n_); }

  Effects start(Context &ctx) {
    Effects eff;
    if (opt_.bootstrap_leader) {
      term_ = 1;
      leader_ = *opt_.bootstrap_leader;
      if (*opt_.bootstrap_leader == id_) {
        set_role(Role::Leader, eff);
        reset_leader_state();
        eff.arm(TimerKind::Heartbeat, ctx.now + opt_.heartbeat_interval);
        return eff;
      }
    }
    arm_election(ctx, eff);
    return eff;
  }

  Effects on_timer(TimerKind kind, Context &ctx) {
    Effects eff;
    if (kind == TimerKind::Election && role_ != Role::Leader) {
      become_candidate(ctx, eff);
    } else if (kind == TimerKind::Heartbeat && role_ == Role::Leader) {
      for (NodeId p = 0; p < n_; ++p)
        if (p != id_ && ctx.now - last_sent_[p] >= opt_.heartbeat_interval) send_append(p, true, ctx, eff);
      eff.arm(TimerKind::Heartbeat, ctx.now + opt_.heartbeat_interval);
    } else if (kind == TimerKind::BatchFlush && role_ == Role::Leader) {
      flush(ctx, eff);
    }
    return eff;
  }

  Effects on_client(const ClientRequest &req, Context &ctx) {
    Effects eff;
    if (role_ != Role::Leader) {
      eff.client.push_back({req.id, ClientStatus::NotLeader, leader_});
      return eff;
    }
    if (log_.find_request(req.id) || pending_ids_.count(req.id)) {
      eff.client.push_back({req.id, ClientStatus::Duplicate, id_});
      return eff;
    }
    if (!pending_.empty() && pending_bytes_ + req.payload.size() > opt_.batch_max_bytes) flush(ctx, eff);
    pending_.push_back(req);
    pending_ids_.insert(req.id);
    pending_bytes_ += req.payload.size();
    eff.client.push_back({req.id, ClientStatus::Accepted, id_});
    if (pending_bytes_ >= opt_.batch_max_bytes) {
      flush(ctx, eff);
    } else if (!flush_armed_) {
      flush_armed_ = true;
      eff.arm(TimerKind::BatchFlush, ctx.now + opt_.batch_flush_ms);
    }
    return eff;
  }

  Effects on_message(NodeId from, const Message &m, Context &ctx) {
    Effects eff;
    if (from >= n_ || from == id_) return eff;
    std::visit(Overloaded{
                   [&](const RaftAppend &a) { on_append(from, a, ctx, eff); },
                   [&](const RaftAppendReply &r) { on_reply(from, r, ctx, eff); },
                   [&](const RaftCommit &c) { on_commit(from, c, eff); },
                   [&](const RaftRequestVote &r) { on_request_vote(from, r, ctx, eff); },
                   [&](const RaftVote &v) { on_vote(from, v, ctx, eff); },
                   [&](const auto &) {},
               },
               m);
    return eff;
  }

private:
  static constexpr SimTime kInf = std::numeric_limits<SimTime>::infinity();

  void set_role(Role r, Effects &eff) {
    if (r == role_) return;
    role_ = r;
    eff.notes.push_back({Note::Kind::Role, term_, log_.last_index(), std::nullopt, id_, role_name(r)});
  }

  void arm_election(Context &ctx, Effects &eff) {
    eff.arm(TimerKind::Election, ctx.now + uniform(ctx.rng, opt_.timeout_lo, opt_.timeout_hi));
  }

  void adopt_term(Term t, Effects &eff) {
    if (t > term_) {
      term_ = t;
      voted_for_.reset();
      leader_.reset();
      verified_ = 0;
    }
    if (role_ == Role::Leader) {
      eff.cancel(TimerKind::Heartbeat);
      eff.cancel(TimerKind::BatchFlush);
      pending_.clear();
      pending_ids_.clear();
      pending_bytes_ = 0;
      flush_armed_ = false;
      batch_ends_.clear();
    }
    set_role(Role::Follower, eff);
  }

  void become_candidate(Context &ctx, Effects &eff) {
    term_ += 1;
    voted_for_ = id_;
    leader_.reset();
    votes_ = {id_};
    set_role(Role::Candidate, eff);
    auto rv = make_message(RaftRequestVote{term_, log_.last_term(), log_.last_index()});
    for (NodeId p = 0; p < n_; ++p)
      if (p != id_) eff.send(p, rv);
    arm_election(ctx, eff);
    if (votes_.size() >= quorum()) become_leader(ctx, eff);
  }

  void on_request_vote(NodeId from, const RaftRequestVote &r, Context &ctx, Effects &eff) {
    if (r.term > term_) adopt_term(r.term, eff);
    const bool ok = r.term == term_ && (!voted_for_ || *voted_for_ == from) &&
                    is_more_up_to_date({r.last_log_term, r.last_log_index}, log_.position());
    if (ok) {
      voted_for_ = from;
      arm_election(ctx, eff);
    }
    eff.send(from, make_message(RaftVote{term_, ok}));
  }

  void on_vote(NodeId from, const RaftVote &v, Context &ctx, Effects &eff) {
    if (v.term > term_) {
      adopt_term(v.term, eff);
      return;
    }
    if (role_ != Role::Candidate || v.term != term_ || !v.granted) return;
    votes_.insert(from);
    if (votes_.size() >= quorum()) become_leader(ctx, eff);
  }

  void become_leader(Context &ctx, Effects &eff) {
    leader_ = id_;
    set_role(Role::Leader, eff);
    reset_leader_state();
    eff.cancel(TimerKind::Election);
    eff.arm(TimerKind::Heartbeat, ctx.now + opt_.heartbeat_interval);
    append_batch({ClientRequest{0, {}}}, ctx, eff);
  }

  void reset_leader_state() {
    std::fill(next_.begin(), next_.end(), log_.last_index() + 1);
    std::fill(match_.begin(), match_.end(), 0);
    std::fill(last_sent_.begin(), last_sent_.end(), -kInf);
    match_[id_] = log_.last_index();
  }

  void flush(Context &ctx, Effects &eff) {
    flush_armed_ = false;
    eff.cancel(TimerKind::BatchFlush);
    if (pending_.empty()) return;
    std::vector<ClientRequest> batch;
    batch.swap(pending_);
    pending_ids_.clear();
    pending_bytes_ = 0;
    append_batch(batch, ctx, eff);
  }

  void append_batch(const std::vector<ClientRequest> &batch, Context &ctx, Effects &eff) {
    const LogIndex first = log_.last_index() + 1;
    for (const auto &req : batch) {
      LogEntry e{term_, log_.last_index() + 1, req.id, req.payload};
      log_.append(e);
      eff.log.push_back({LogEvent::Kind::Append, e.index, e.term, log_.digest_at(e.index), e.request_id});
    }
    match_[id_] = log_.last_index();
    batch_ends_.push_back(log_.last_index());
    // One shared message for every follower that is caught up.
    MessagePtr shared;
    for (NodeId p = 0; p < n_; ++p) {
      if (p == id_) continue;
      if (next_[p] == first) {
        if (!shared) shared = append_for(first);
        eff.send(p, shared);
        next_[p] = log_.last_index() + 1;
        last_sent_[p] = ctx.now;
      } else {
        send_append(p, false, ctx, eff);
      }
    }
    advance_commit(ctx, eff);
  }

  MessagePtr append_for(LogIndex from_index) const {
    const LogIndex prev = from_index - 1;
    return make_message(RaftAppend{term_, prev, log_.term_at(prev), log_.slice(from_index, log_.last_index()),
                                   log_.commit_index()});
  }

  void send_append(NodeId p, bool heartbeat, Context &ctx, Effects &eff) {
    const LogIndex from_index = std::min(next_[p], log_.last_index() + 1);
    if (heartbeat) {
      const LogIndex prev = from_index - 1;
      eff.send(p, make_message(RaftAppend{term_, prev, log_.term_at(prev), {}, log_.commit_index()}));
    } else {
      eff.send(p, append_for(from_index));
      next_[p] = log_.last_index() + 1;
    }
    last_sent_[p] = ctx.now;
  }

  void on_append(NodeId from, const RaftAppend &a, Context &ctx, Effects &eff) {
    const bool hb = a.entries.empty();
    if (a.term < term_) {
      eff.send(from, make_message(RaftAppendReply{term_, false, 0, hb}));
      return;
    }
    if (a.term > term_ || role_ != Role::Follower) adopt_term(a.term, eff);
    leader_ = from;
    arm_election(ctx, eff);
    if (a.prev_index > log_.last_index() || log_.term_at(a.prev_index) != a.prev_term) {
      const LogIndex hint = std::min(log_.last_index(), a.prev_index > 0 ? a.prev_index - 1 : 0);
      eff.send(from, make_message(RaftAppendReply{term_, false, hint, hb}));
      return;
    }
    for (const auto &e : a.entries) {
      if (e.index <= log_.last_index()) {
        if (log_.term_at(e.index) == e.term) continue;
        if (e.index <= log_.commit_index()) {
          eff.send(from, make_message(RaftAppendReply{term_, false, log_.commit_index(), hb}));
          return;
        }
        log_.truncate_from(e.index);
        eff.log.push_back({LogEvent::Kind::Truncate, e.index, e.term, {}, 0});
      }
      log_.append(e);
      eff.log.push_back({LogEvent::Kind::Append, e.index, e.term, log_.digest_at(e.index), e.request_id});
    }
    verified_ = a.prev_index + a.entries.size();
    commit_through(std::min(a.leader_commit, verified_), eff);
    eff.send(from, make_message(RaftAppendReply{term_, true, verified_, hb}));
  }

  void on_reply(NodeId from, const RaftAppendReply &r, Context &ctx, Effects &eff) {
    if (r.term > term_) {
      adopt_term(r.term, eff);
      return;
    }
    if (role_ != Role::Leader || r.term != term_) return;
    if (r.success) {
      match_[from] = std::max(match_[from], r.match_index);
      next_[from] = std::max(next_[from], match_[from] + 1);
      advance_commit(ctx, eff);
      return;
    }
    next_[from] = std::max<LogIndex>(1, std::min(next_[from] - 1, r.match_index + 1));
    send_append(from, false, ctx, eff);
  }

  void on_commit(NodeId from, const RaftCommit &c, Effects &eff) {
    if (c.term != term_ || leader_ != from) return;
    commit_through(std::min(c.index, verified_), eff);
  }

  void advance_commit(Context &ctx, Effects &eff) {
    std::vector<LogIndex> m(match_);
    std::sort(m.begin(), m.end(), std::greater<>());
    const LogIndex idx = m[quorum() - 1];
    if (idx <= log_.commit_index() || log_.term_at(idx) != term_) return;
    commit_through(idx, eff);
    auto msg = make_message(RaftCommit{term_, idx});
    for (NodeId p = 0; p < n_; ++p) {
      if (p == id_) continue;
      eff.send(p, msg);
      last_sent_[p] = ctx.now;
    }
  }

  void commit_through(LogIndex idx, Effects &eff) {
    const LogIndex old = log_.commit_index();
    if (idx <= old) return;
    log_.commit_to(idx);
    for (LogIndex i = old + 1; i <= idx; ++i)
      eff.log.push_back({LogEvent::Kind::Commit, i, log_.term_at(i), log_.digest_at(i), log_.at(i).request_id});
    std::size_t done = 0;
    while (!batch_ends_.empty() && batch_ends_.front() <= idx) {
      batch_ends_.pop_front();
      ++done;
    }
    if (done) eff.notes.push_back({Note::Kind::Batch, term_, idx, log_.digest_at(idx), id_, "batch", done});
  }

  NodeId id_;
  std::size_t n_;
  RaftOptions opt_;
  Role role_ = Role::Follower;
  Term term_ = 0;
  ReplicatedLog log_;
  std::optional<NodeId> voted_for_;
  std::optional<NodeId> leader_;
  std::set<NodeId> votes_;
  LogIndex verified_ = 0; // prefix known to match the current leader

  std::vector<LogIndex> next_;
  std::vector<LogIndex> match_;
  std::vector<SimTime> last_sent_;
  std::vector<ClientRequest> pending_;
  std::unordered_set<RequestId> pending_ids_;
  std::size_t pending_bytes_ = 0;
  bool flush_armed_ = false;
  std::deque<LogIndex> batch_ends_;
};

static_assert(Replica<RaftReplica>);

} // namespace mraft
