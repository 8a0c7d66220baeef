#pragma once

// PBFT normal case on the shared transport: fixed primary, all-to-all
// prepare and commit phases, in-order execution. No view change.

#include "mraft/core.hpp"
#include "mraft/message.hpp"
#include "mraft/replica.hpp"

#include <map>
#include <set>
#include <unordered_set>
#include <vector>

namespace mraft {

struct PbftOptions {
  std::size_t batch_max_bytes = 20480;
  SimTime batch_flush_ms = 5;
  NodeId primary = 0;
};

/// n = 3 f_b + 1 replicas, quorum 2 f_b + 1.
struct PbftParams {
  std::size_t n = 0;
  std::size_t f = 0;
  std::size_t quorum = 0;
};

inline PbftParams pbft_params(std::size_t n) {
  if (n < 1 || (n - 1) % 3 != 0)
    throw ConfigError("pbft n=" + std::to_string(n) + ": n-1 not divisible by 3 (need n = 3f+1)");
  const std::size_t f = (n - 1) / 3;
  return {n, f, 2 * f + 1};
}

inline Digest batch_digest(const std::vector<LogEntry> &entries) {
  ByteWriter w;
  for (const auto &e : entries) w.u64(e.term).u64(e.index).u64(e.request_id).digest(sha256(e.payload));
  return sha256(w.data());
}

class PbftReplica {
public:
  PbftReplica(NodeId id, std::size_t n, PbftOptions opt = {}) : id_(id), params_(pbft_params(n)), opt_(opt) {
    if (id >= n || opt.primary >= n) throw ConfigError("pbft: bad node id");
  }

  NodeId id() const { return id_; }
  Role role() const { return id_ == opt_.primary ? Role::Leader : Role::Follower; }
  Term term() const { return view_ + 1; }
  const ReplicatedLog &log() const { return log_; }
  const PbftParams &params() const { return params_; }

  Effects start(Context &) {
    Effects eff;
    if (id_ == opt_.primary)
      eff.notes.push_back({Note::Kind::Role, term(), 0, std::nullopt, id_, role_name(Role::Leader)});
    return eff;
  }

  Effects on_timer(TimerKind kind, Context &ctx) {
    Effects eff;
    if (kind == TimerKind::BatchFlush && id_ == opt_.primary) flush(ctx, eff);
    return eff;
  }

  Effects on_client(const ClientRequest &req, Context &ctx) {
    Effects eff;
    if (id_ != opt_.primary) {
      eff.client.push_back({req.id, ClientStatus::NotLeader, opt_.primary});
      return eff;
    }
    if (seen_ids_.count(req.id)) {
      eff.client.push_back({req.id, ClientStatus::Duplicate, id_});
      return eff;
    }
    if (!pending_.empty() && pending_bytes_ + req.payload.size() > opt_.batch_max_bytes) flush(ctx, eff);
    pending_.push_back(req);
    seen_ids_.insert(req.id);
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
    if (from >= params_.n || from == id_) return eff;
    std::visit(Overloaded{
                   [&](const PrePrepare &p) { on_pre_prepare(from, p, ctx, eff); },
                   [&](const Prepare &p) {
                     if (p.view != view_ || p.seq < next_exec_) return;
                     slot(p.seq).prepares[p.digest].insert(from);
                     progress(p.seq, ctx, eff);
                   },
                   [&](const PbftCommit &c) {
                     if (c.view != view_ || c.seq < next_exec_) return;
                     slot(c.seq).commits[c.digest].insert(from);
                     progress(c.seq, ctx, eff);
                   },
                   [&](const auto &) {},
               },
               m);
    return eff;
  }

private:
  struct Slot {
    std::optional<Digest> digest; // from the accepted pre-prepare
    std::vector<LogEntry> entries;
    std::map<Digest, std::set<NodeId>> prepares;
    std::map<Digest, std::set<NodeId>> commits;
    bool sent_commit = false;
    bool committed = false;
  };

  Slot &slot(std::uint64_t seq) { return slots_[seq]; }

  void broadcast(const MessagePtr &msg, Effects &eff) {
    for (NodeId p = 0; p < params_.n; ++p)
      if (p != id_) eff.send(p, msg);
  }

  void flush(Context &ctx, Effects &eff) {
    flush_armed_ = false;
    eff.cancel(TimerKind::BatchFlush);
    if (pending_.empty()) return;
    std::vector<LogEntry> entries;
    for (auto &req : pending_) entries.push_back(LogEntry{term(), next_index_++, req.id, std::move(req.payload)});
    pending_.clear();
    pending_bytes_ = 0;
    const std::uint64_t seq = next_seq_++;
    const Digest d = batch_digest(entries);
    Slot &s = slot(seq);
    s.digest = d;
    s.entries = entries;
    broadcast(make_message(PrePrepare{view_, seq, d, std::move(entries)}), eff);
    s.prepares[d].insert(id_);
    broadcast(make_message(Prepare{view_, seq, d}), eff);
    progress(seq, ctx, eff);
  }

  void on_pre_prepare(NodeId from, const PrePrepare &p, Context &ctx, Effects &eff) {
    if (from != opt_.primary || p.view != view_ || p.seq < next_exec_) return;
    Slot &s = slot(p.seq);
    if (s.digest || batch_digest(p.entries) != p.digest) return;
    s.digest = p.digest;
    s.entries = p.entries;
    s.prepares[p.digest].insert(id_);
    broadcast(make_message(Prepare{view_, p.seq, p.digest}), eff);
    progress(p.seq, ctx, eff);
  }

  void progress(std::uint64_t seq, Context &, Effects &eff) {
    Slot &s = slot(seq);
    if (!s.digest) return;
    const Digest d = *s.digest;
    if (!s.sent_commit && s.prepares[d].size() >= params_.quorum) {
      s.sent_commit = true;
      s.commits[d].insert(id_);
      broadcast(make_message(PbftCommit{view_, seq, d}), eff);
    }
    if (s.sent_commit && !s.committed && s.commits[d].size() >= params_.quorum) s.committed = true;
    execute(eff);
  }

  void execute(Effects &eff) {
    while (true) {
      auto it = slots_.find(next_exec_);
      if (it == slots_.end() || !it->second.committed) return;
      for (const auto &e : it->second.entries) {
        if (e.index != log_.last_index() + 1) throw LogError("pbft: out-of-order entry index");
        log_.append(e);
        eff.log.push_back({LogEvent::Kind::Append, e.index, e.term, log_.digest_at(e.index), e.request_id});
        log_.commit_to(e.index);
        eff.log.push_back({LogEvent::Kind::Commit, e.index, e.term, log_.digest_at(e.index), e.request_id});
      }
      if (id_ == opt_.primary)
        eff.notes.push_back({Note::Kind::Batch, term(), log_.last_index(), log_.digest_at(log_.last_index()), id_,
                             "batch", 1});
      slots_.erase(it);
      ++next_exec_;
    }
  }

  NodeId id_;
  PbftParams params_;
  PbftOptions opt_;
  std::uint64_t view_ = 0;
  ReplicatedLog log_;
  std::map<std::uint64_t, Slot> slots_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t next_exec_ = 1;
  LogIndex next_index_ = 1;
  std::vector<ClientRequest> pending_;
  std::unordered_set<RequestId> seen_ids_;
  std::size_t pending_bytes_ = 0;
  bool flush_armed_ = false;
};

static_assert(Replica<PbftReplica>);

} // namespace mraft
