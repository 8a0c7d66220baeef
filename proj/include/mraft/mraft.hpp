#pragma once

// MRaft replica: TEE-leader replication with commit certificates, elections
// that favour TEE nodes through timeout asymmetry and vote queueing, catch-up
// by fetch, and the CoSi path used when a non-TEE node leads.

#include "mraft/core.hpp"
#include "mraft/crypto.hpp"
#include "mraft/message.hpp"
#include "mraft/replica.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_set>
#include <vector>

namespace mraft {

enum class NonTeeLeaderMode { Cosi, IdleWait };

struct MRaftOptions {
  SimTime tee_timeout_lo = 150;
  SimTime tee_timeout_hi = 300;
  SimTime non_tee_timeout_lo = 450;
  SimTime non_tee_timeout_hi = 600;
  SimTime heartbeat_interval = 50;
  std::size_t batch_max_bytes = 20480;
  SimTime batch_flush_ms = 5;
  NonTeeLeaderMode non_tee_leader = NonTeeLeaderMode::Cosi;
  std::size_t election_quorum = 0; // 0 selects the cluster's q_elec
  UpToDateRule up_to_date = UpToDateRule::TermThenIndex;
  SimTime cosi_round_timeout = 1000;
  SimTime cosi_grace = 50;
  SimTime fetch_backoff = 100;
  // A leader that hears from fewer than q_rep-1 followers over this window
  // steps down, so a stranded minority leader cannot hold voters hostage.
  // 0 disables the check.
  SimTime check_quorum_ms = 400;
  // Each consecutive failed candidacy doubles the retry interval up to this
  // factor, so far-away votes can arrive before the term moves on. 1 disables.
  unsigned candidate_backoff_max = 4;
  std::optional<NodeId> bootstrap_leader = NodeId{0};
};

/// State tweaks an adversary may apply to a node it controls.
struct Misbehavior {
  LogIndex claim_inflation = 0; // added to the claimed last index when standing
};

class MRaftReplica {
public:
  MRaftReplica(NodeId id, ClusterConfig cfg, std::shared_ptr<const Keyring> keys, MRaftOptions opt = {})
      : id_(id), cfg_(std::move(cfg)), keys_(std::move(keys)), opt_(opt), tee_(cfg_.is_tee(id)),
        match_(cfg_.n(), 0), acked_(cfg_.n(), false), last_sent_(cfg_.n(), -kInf), heard_(cfg_.n(), -kInf) {
    if (id_ >= cfg_.n()) throw ConfigError("replica id out of range");
    if (!keys_ || keys_->identity.size() != cfg_.n()) throw ConfigError("keyring does not match cluster");
  }

  // -- accessors -------------------------------------------------------------
  NodeId id() const { return id_; }
  Role role() const { return role_; }
  Term term() const { return term_; }
  const ReplicatedLog &log() const { return log_; }
  std::optional<NodeId> leader() const { return leader_; }
  bool is_tee() const { return tee_; }
  bool timeout_elapsed() const { return timeout_elapsed_; }
  const std::optional<RequestVote> &queued_vote() const { return queued_; }
  std::optional<NodeId> voted_for() const { return voted_for_; }
  std::size_t votes_received() const { return votes_.size(); }
  const std::optional<ProofOfLeadership> &proof() const { return proof_; }
  const std::optional<CommitProof> &latest_proof() const { return latest_proof_; }
  std::optional<LogPosition> leader_claim() const { return leader_claim_; }
  std::size_t election_quorum() const { return opt_.election_quorum ? opt_.election_quorum : cfg_.q_elec(); }
  const ClusterConfig &config() const { return cfg_; }
  const MRaftOptions &options() const { return opt_; }
  void set_misbehavior(Misbehavior m) { bad_ = m; }

  // -- transitions -----------------------------------------------------------
  Effects start(Context &ctx) {
    Effects eff;
    if (opt_.bootstrap_leader) {
      term_ = 1;
      leader_ = *opt_.bootstrap_leader;
      if (*opt_.bootstrap_leader == id_) {
        set_role(Role::Leader, eff);
        reset_leader_state();
        leader_since_ = ctx.now;
        eff.arm(TimerKind::Heartbeat, ctx.now + opt_.heartbeat_interval);
        return eff;
      }
    }
    arm_election(ctx, eff);
    return eff;
  }

  Effects on_timer(TimerKind kind, Context &ctx) {
    Effects eff;
    switch (kind) {
    case TimerKind::Election: election_timeout(ctx, eff); break;
    case TimerKind::Heartbeat:
      if (role_ == Role::Leader) {
        if (quorum_lost(ctx)) {
          abdicate(ctx, eff);
          break;
        }
        send_heartbeats(ctx, eff);
        eff.arm(TimerKind::Heartbeat, ctx.now + opt_.heartbeat_interval);
      }
      break;
    case TimerKind::BatchFlush:
      if (role_ == Role::Leader) flush(ctx, eff);
      break;
    case TimerKind::CosiRound:
      if (role_ == Role::Leader && round_) {
        round_.reset();
        maybe_start_round(ctx, eff);
      }
      break;
    case TimerKind::CosiGrace:
      if (role_ == Role::Leader && round_) cosi_advance(ctx, eff, true);
      break;
    case TimerKind::Retry: break;
    }
    return eff;
  }

  Effects on_client(const ClientRequest &req, Context &ctx) {
    Effects eff;
    if (role_ != Role::Leader) {
      eff.client.push_back({req.id, ClientStatus::NotLeader, leader_});
      return eff;
    }
    if (req.id == 0) throw std::invalid_argument("request id 0 is reserved");
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
    if (from >= cfg_.n() || from == id_) return eff;
    if (role_ == Role::Leader && is_follower_reply(m) && summarize(m).term == term_) heard_[from] = ctx.now;
    if (role_ == Role::Leader) {
      if (auto *a = std::get_if<Ack>(&m); a && a->term > term_ && a->signer == from) {
        note_higher_term(from, a->term, ctx, eff);
        return eff;
      }
    }
    std::visit(Overloaded{
                   [&](const Append &a) { on_append(from, a, ctx, eff); },
                   [&](const Ack &a) { on_ack(from, a, ctx, eff); },
                   [&](const Cert &c) { on_cert(from, c, ctx, eff); },
                   [&](const HeartBeat &h) { on_heartbeat(from, h, ctx, eff); },
                   [&](const RequestVote &r) { on_request_vote(from, r, ctx, eff); },
                   [&](const Vote &v) { on_vote(from, v, ctx, eff); },
                   [&](const CoSiAnnounce &a) { on_cosi_announce(from, a, ctx, eff); },
                   [&](const CoSiCommit &c) { on_cosi_commit(from, c, ctx, eff); },
                   [&](const CoSiChallenge &c) { on_cosi_challenge(from, c, ctx, eff); },
                   [&](const CoSiResponse &r) { on_cosi_response(from, r, ctx, eff); },
                   [&](const CoSig &c) { on_cosig(from, c, ctx, eff); },
                   [&](const FetchEntries &f) { on_fetch(from, f, ctx, eff); },
                   [&](const EntriesResponse &r) { on_entries(from, r, ctx, eff); },
                   [&](const auto &) {},
               },
               m);
    return eff;
  }

  // -- verification helpers (also used by tests) -----------------------------
  bool proof_valid(const ProofOfLeadership &p, NodeId from, Term term, const crypto::CryptoContext &cc) const {
    if (p.leader != from || p.term != term) return false;
    const std::size_t q = election_quorum();
    if (p.enclave) {
      const auto &e = *p.enclave;
      if (!cfg_.is_tee(from) || e.term != term || e.leader != from || !(e.claim == p.claim)) return false;
      if (e.voters.size() != cfg_.n() || e.voters.count() < q) return false;
      return cc.verify(keys_->enclave_pk(from), enclave_vote_statement(e.term, e.leader, e.claim, e.voters),
                       e.enclave_sig);
    }
    std::set<NodeId> voters;
    for (const auto &v : p.votes) {
      if (v.term != term || v.candidate != from || !(v.claim == p.claim) || v.voter >= cfg_.n()) return false;
      if (!cc.verify(keys_->identity_pks[v.voter], vote_statement(v.term, v.voter, v.candidate, v.claim), v.sig))
        return false;
      voters.insert(v.voter);
    }
    return voters.size() >= q;
  }

  bool commit_proof_valid(const CommitProof &p, const crypto::CryptoContext &cc) const {
    if (p.cert) {
      const auto &c = *p.cert;
      if (!cfg_.is_tee(c.issuer) || c.acks.size() != cfg_.n() || c.acks.count() < cfg_.q_rep()) return false;
      return cc.verify(keys_->enclave_pk(c.issuer), cert_statement(c.issuer, c.term, c.index, c.digest, c.acks),
                       c.enclave_sig);
    }
    if (p.cosig) {
      const auto &c = *p.cosig;
      if (c.leader >= cfg_.n() || c.sig.bitmap.size() != cfg_.n() || c.sig.bitmap.test(c.leader)) return false;
      if (c.sig.bitmap.count() < cfg_.q_rep()) return false;
      return cc.cosi_verify(keys_->identity_pks, cosig_statement(c.leader, c.term, c.index, c.digest), c.sig);
    }
    return false;
  }

private:
  static constexpr SimTime kInf = std::numeric_limits<SimTime>::infinity();

  struct CosiRound {
    std::uint64_t round = 0;
    LogIndex end = 0;
    Digest end_digest{};
    Bytes statement;
    bool challenged = false;
    std::map<NodeId, BigInt> commitments;
    std::map<NodeId, BigInt> responses;
    std::set<NodeId> bad;
    ParticipationBitmap participants;
    BigInt aggregate_commitment;
    BigInt challenge;
    bool grace_armed = false;
  };

  struct CosiPending {
    Term term = 0;
    std::uint64_t round = 0;
    LogIndex end = 0;
    Digest digest{};
    BigInt secret;
    bool responded = false;
  };

  // -- roles and timers --------------------------------------------------------
  void set_role(Role r, Effects &eff) {
    if (r == role_) return;
    role_ = r;
    eff.notes.push_back({Note::Kind::Role, term_, log_.last_index(), std::nullopt, id_, role_name(r)});
  }

  void arm_election(Context &ctx, Effects &eff, double scale = 1) {
    const SimTime lo = tee_ ? opt_.tee_timeout_lo : opt_.non_tee_timeout_lo;
    const SimTime hi = tee_ ? opt_.tee_timeout_hi : opt_.non_tee_timeout_hi;
    eff.arm(TimerKind::Election, ctx.now + scale * uniform(ctx.rng, lo, hi));
  }

  bool may_stand() const { return tee_ || opt_.non_tee_leader == NonTeeLeaderMode::Cosi; }

  void step_down(Term new_term, Effects &eff) {
    const bool was = role_ != Role::Follower;
    if (new_term > term_) {
      term_ = new_term;
      voted_for_.reset();
      leader_.reset();
      leader_claim_.reset();
    }
    if (role_ == Role::Leader) {
      eff.cancel(TimerKind::Heartbeat);
      eff.cancel(TimerKind::BatchFlush);
      eff.cancel(TimerKind::CosiRound);
      eff.cancel(TimerKind::CosiGrace);
    }
    if (was) set_role(Role::Follower, eff);
    clear_leader_state();
    votes_.clear();
  }

  static bool is_follower_reply(const Message &m) {
    return std::holds_alternative<Ack>(m) || std::holds_alternative<CoSiCommit>(m) ||
           std::holds_alternative<CoSiResponse>(m) || std::holds_alternative<FetchEntries>(m);
  }

  bool quorum_lost(const Context &ctx) const {
    if (opt_.check_quorum_ms <= 0 || ctx.now - leader_since_ < opt_.check_quorum_ms) return false;
    std::size_t live = 1;
    for (NodeId p = 0; p < cfg_.n(); ++p)
      if (p != id_ && ctx.now - heard_[p] < opt_.check_quorum_ms) ++live;
    return live < cfg_.q_rep();
  }

  // More than n - q_rep followers past this term means no replication quorum
  // is left; at least one report is honest, so the smallest is safe to adopt.
  void note_higher_term(NodeId from, Term t, Context &ctx, Effects &eff) {
    higher_[from] = t;
    if (higher_.size() <= cfg_.n() - cfg_.q_rep()) return;
    Term lowest = t;
    for (const auto &[_, v] : higher_) lowest = std::min(lowest, v);
    abdicate(ctx, eff);
    step_down(lowest, eff);
  }

  // Keeps the term; the node becomes a free voter for the next election.
  void abdicate(Context &ctx, Effects &eff) {
    step_down(term_, eff);
    leader_.reset();
    leader_claim_.reset();
    timeout_elapsed_ = true;
    arm_election(ctx, eff);
  }

  void election_timeout(Context &ctx, Effects &eff) {
    if (role_ == Role::Leader) return;
    timeout_elapsed_ = true;
    if (queued_) {
      RequestVote rv = *queued_;
      queued_.reset();
      if (can_grant(rv)) {
        grant(rv, ctx, eff);
        return;
      }
    }
    if (!may_stand()) {
      arm_election(ctx, eff);
      return;
    }
    become_candidate(ctx, eff);
  }

  void become_candidate(Context &ctx, Effects &eff) {
    term_ += 1;
    leader_.reset();
    leader_claim_.reset();
    voted_for_ = id_;
    votes_.clear();
    my_claim_ = log_.position();
    my_claim_.last_index += bad_.claim_inflation;
    if (bad_.claim_inflation) my_claim_.last_term = term_ - 1;
    set_role(Role::Candidate, eff);
    votes_[id_] = make_vote(term_, id_, my_claim_, ctx);
    auto rv = make_message(RequestVote{id_, term_, my_claim_.last_term, my_claim_.last_index});
    for (NodeId p = 0; p < cfg_.n(); ++p)
      if (p != id_) eff.send(p, rv);
    const unsigned cap = std::max(1u, opt_.candidate_backoff_max);
    arm_election(ctx, eff, std::min(cap, 1u << std::min(candidacies_, 16u)));
    ++candidacies_;
    if (votes_.size() >= election_quorum()) become_leader(ctx, eff);
  }

  VoteRecord make_vote(Term term, NodeId candidate, LogPosition claim, Context &ctx) const {
    VoteRecord v{term, id_, candidate, claim, {}};
    v.sig = ctx.crypto.sign(keys_->identity[id_].sk, vote_statement(term, id_, candidate, claim));
    return v;
  }

  // -- voting ------------------------------------------------------------------
  bool can_grant(const RequestVote &rv) const {
    if (role_ == Role::Leader) return false;
    if (rv.new_term < term_) return false;
    if (rv.new_term == term_ && (voted_for_ || leader_)) return false;
    return up_to_date(opt_.up_to_date, rv.claim(), log_.position());
  }

  void grant(const RequestVote &rv, Context &ctx, Effects &eff) {
    if (rv.new_term > term_) step_down(rv.new_term, eff);
    voted_for_ = rv.candidate;
    queued_.reset();
    // The timer restarts at twice the usual length so the pick has time to
    // announce itself before this voter stands; it stays elapsed because no
    // leader has been heard.
    arm_election(ctx, eff, 2);
    eff.send(rv.candidate, make_message(Vote{make_vote(rv.new_term, rv.candidate, rv.claim(), ctx)}));
  }

  void on_request_vote(NodeId from, const RequestVote &rv, Context &ctx, Effects &eff) {
    if (rv.candidate != from || role_ == Role::Leader) return;
    if (!timeout_elapsed_ && role_ == Role::Follower) {
      if (rv.new_term <= term_) return;
      if (!queued_ || queued_->candidate == rv.candidate ||
          !up_to_date(opt_.up_to_date, queued_->claim(), rv.claim()))
        queued_ = rv;
      return;
    }
    if (can_grant(rv)) {
      grant(rv, ctx, eff);
    } else if (rv.new_term > term_) {
      step_down(rv.new_term, eff);
    }
  }

  void on_vote(NodeId from, const Vote &v, Context &ctx, Effects &eff) {
    const auto &r = v.record;
    if (role_ != Role::Candidate || r.term != term_ || r.candidate != id_ || r.voter != from) return;
    if (!(r.claim == my_claim_) || votes_.count(from)) return;
    if (!ctx.crypto.verify(keys_->identity_pks[from], vote_statement(r.term, r.voter, r.candidate, r.claim), r.sig))
      return;
    votes_[from] = r;
    if (votes_.size() >= election_quorum()) become_leader(ctx, eff);
  }

  void become_leader(Context &ctx, Effects &eff) {
    leader_ = id_;
    leader_claim_ = my_claim_;
    candidacies_ = 0;
    ProofOfLeadership p{term_, id_, my_claim_, std::nullopt, {}};
    if (tee_) {
      ParticipationBitmap voters(cfg_.n());
      for (const auto &[voter, _] : votes_) voters.set(voter);
      EnclaveVoteCert e{term_, id_, my_claim_, voters, {}};
      e.enclave_sig = ctx.crypto.sign(keys_->enclave[id_]->sk, enclave_vote_statement(term_, id_, my_claim_, voters));
      p.enclave = e;
    } else {
      for (const auto &[_, v] : votes_) p.votes.push_back(v);
    }
    proof_ = p;
    votes_.clear();
    set_role(Role::Leader, eff);
    reset_leader_state();
    leader_since_ = ctx.now;
    send_heartbeats(ctx, eff);
    eff.arm(TimerKind::Heartbeat, ctx.now + opt_.heartbeat_interval);
    eff.cancel(TimerKind::Election);
    // No-op entry in the new term; it carries the commit of any earlier-term suffix.
    append_batch({ClientRequest{0, {}}}, ctx, eff);
  }

  void reset_leader_state() {
    std::fill(match_.begin(), match_.end(), 0);
    std::fill(acked_.begin(), acked_.end(), false);
    std::fill(last_sent_.begin(), last_sent_.end(), -kInf);
    std::fill(heard_.begin(), heard_.end(), -kInf);
    higher_.clear();
    match_[id_] = log_.last_index();
  }

  void clear_leader_state() {
    pending_.clear();
    pending_ids_.clear();
    pending_bytes_ = 0;
    flush_armed_ = false;
    batch_ends_.clear();
    round_.reset();
    excluded_.clear();
    proof_.reset();
  }

  // -- leader: batching and replication -------------------------------------------
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
    const LogIndex prev = log_.last_index();
    const Digest prev_digest = log_.digest_at(prev);
    std::vector<LogEntry> entries;
    for (const auto &req : batch) {
      LogEntry e{term_, log_.last_index() + 1, req.id, req.payload};
      log_.append(e);
      eff.log.push_back({LogEvent::Kind::Append, e.index, e.term, log_.digest_at(e.index), e.request_id});
      entries.push_back(std::move(e));
    }
    match_[id_] = log_.last_index();
    batch_ends_.push_back(log_.last_index());
    if (tee_) {
      auto msg = make_message(Append{term_, prev, prev_digest, std::move(entries), log_.commit_index()});
      broadcast(msg, ctx, eff);
      advance_commit(ctx, eff);
    } else {
      maybe_start_round(ctx, eff);
    }
  }

  void broadcast(const MessagePtr &msg, Context &ctx, Effects &eff) {
    for (NodeId p = 0; p < cfg_.n(); ++p) {
      if (p == id_) continue;
      eff.send(p, msg);
      last_sent_[p] = ctx.now;
    }
  }

  void send_heartbeats(Context &ctx, Effects &eff) {
    MessagePtr plain, with_proof;
    const LogIndex last = log_.last_index();
    for (NodeId p = 0; p < cfg_.n(); ++p) {
      if (p == id_ || ctx.now - last_sent_[p] < opt_.heartbeat_interval) continue;
      const bool attach = !acked_[p] && proof_.has_value();
      auto &slot = attach ? with_proof : plain;
      if (!slot)
        slot = make_message(HeartBeat{term_, log_.commit_index(), last, log_.digest_at(last),
                                      attach ? proof_ : std::nullopt});
      eff.send(p, slot);
      last_sent_[p] = ctx.now;
    }
  }

  void on_ack(NodeId from, const Ack &a, Context &ctx, Effects &eff) {
    if (role_ != Role::Leader || a.term != term_ || a.signer != from) return;
    acked_[from] = true;
    if (a.index > log_.last_index() || log_.digest_at(a.index) != a.digest) {
      if (!a.heartbeat_reply && !cfg_.is_tee(from))
        evidence(from, a.index, "ack digest mismatch", eff);
      return;
    }
    if (a.index > match_[from]) match_[from] = a.index;
    if (tee_) advance_commit(ctx, eff);
  }

  void advance_commit(Context &ctx, Effects &eff) {
    std::vector<LogIndex> m(match_);
    std::sort(m.begin(), m.end(), std::greater<>());
    const LogIndex n_idx = m[cfg_.q_rep() - 1];
    if (n_idx <= log_.commit_index() || log_.term_at(n_idx) != term_) return;
    commit_through(n_idx, eff);
    ParticipationBitmap acks(cfg_.n());
    for (NodeId p = 0; p < cfg_.n(); ++p)
      if (match_[p] >= n_idx) acks.set(p);
    CommitCertificate c{id_, term_, n_idx, log_.digest_at(n_idx), acks, {}};
    c.enclave_sig = ctx.crypto.sign(keys_->enclave[id_]->sk, cert_statement(id_, term_, n_idx, c.digest, acks));
    latest_proof_ = CommitProof{c, std::nullopt};
    eff.notes.push_back({Note::Kind::Proof, term_, n_idx, c.digest, id_, "cert-issued"});
    broadcast(make_message(Cert{c}), ctx, eff);
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

  void on_fetch(NodeId from, const FetchEntries &f, Context &ctx, Effects &eff) {
    if (role_ != Role::Leader || f.term != term_) return;
    const LogIndex from_index = std::clamp<LogIndex>(f.from_index, 1, log_.last_index() + 1);
    EntriesResponse r{term_, from_index - 1, log_.digest_at(from_index - 1),
                      log_.slice(from_index, log_.last_index()), log_.commit_index(), latest_proof_,
                      acked_[from] ? std::nullopt : proof_};
    eff.send(from, make_message(std::move(r)));
    last_sent_[from] = ctx.now;
  }

  // -- follower side -------------------------------------------------------------
  /// True when the message comes from the accepted leader of the current
  /// term, adopting a new leader only on a valid proof of leadership.
  bool accept_leader(NodeId from, Term term, const ProofOfLeadership *proof, Context &ctx, Effects &eff) {
    if (term < term_) return false;
    if (term == term_ && leader_ == from && role_ == Role::Follower) {
      refresh_leader(ctx, eff);
      return true;
    }
    if (from == id_ || !proof || !proof_valid(*proof, from, term, ctx.crypto)) return false;
    if (term > term_ || role_ != Role::Follower) step_down(term, eff);
    leader_ = from;
    leader_claim_ = proof->claim;
    candidacies_ = 0;
    if (proof->claim.last_index < log_.commit_index() ||
        (proof->claim.last_index == log_.commit_index() && log_.commit_index() > 0 &&
         proof->claim.last_term != log_.term_at(log_.commit_index())))
      evidence(from, proof->claim.last_index, "leader claim misses committed prefix", eff);
    refresh_leader(ctx, eff);
    return true;
  }

  void refresh_leader(Context &ctx, Effects &eff) {
    timeout_elapsed_ = false;
    queued_.reset();
    arm_election(ctx, eff);
  }

  void request_fetch(NodeId leader, LogIndex from_index, Context &ctx, Effects &eff) {
    if (ctx.now < fetch_hold_until_ && from_index == last_fetch_from_) return;
    fetch_hold_until_ = ctx.now + opt_.fetch_backoff;
    last_fetch_from_ = from_index;
    eff.send(leader, make_message(FetchEntries{term_, from_index}));
  }

  void evidence(NodeId subject, LogIndex index, const char *what, Effects &eff) {
    eff.notes.push_back({Note::Kind::Evidence, term_, index, std::nullopt, subject, what});
  }

  /// Installs a run of entries after prev_index (whose digest already
  /// matched). Rejects anything touching the committed prefix or breaking
  /// the leader's claimed position.
  bool install(NodeId leader, LogIndex prev_index, const std::vector<LogEntry> &entries, Effects &eff) {
    LogIndex expect = prev_index + 1;
    for (const auto &e : entries) {
      if (e.index != expect++) {
        evidence(leader, e.index, "non-contiguous entries", eff);
        return false;
      }
      if (e.term > term_) {
        evidence(leader, e.index, "entry from a future term", eff);
        return false;
      }
      if (leader_claim_ && leader_ == leader) {
        if (e.term == term_ && e.index <= leader_claim_->last_index) {
          evidence(leader, e.index, "current-term entry inside claimed prefix", eff);
          return false;
        }
        if (e.index == leader_claim_->last_index && e.term != leader_claim_->last_term) {
          evidence(leader, e.index, "entry contradicts leader claim", eff);
          return false;
        }
      }
      if (e.index <= log_.last_index()) {
        if (log_.digest_if_appended(e) == log_.digest_at(e.index)) continue;
        if (e.index <= log_.commit_index()) {
          evidence(leader, e.index, "entries conflict with committed prefix", eff);
          return false;
        }
        log_.truncate_from(e.index);
        eff.log.push_back({LogEvent::Kind::Truncate, e.index, e.term, {}, 0});
      }
      if (e.term < log_.last_term()) {
        evidence(leader, e.index, "term regression", eff);
        return false;
      }
      log_.append(e);
      eff.log.push_back({LogEvent::Kind::Append, e.index, e.term, log_.digest_at(e.index), e.request_id});
    }
    return true;
  }

  // Tells a leader of an older term where this node stands.
  void report_term(NodeId to, Effects &eff) const {
    const LogIndex last = log_.last_index();
    eff.send(to, make_message(Ack{term_, last, log_.digest_at(last), id_, log_.commit_index(), true}));
  }

  void on_append(NodeId from, const Append &a, Context &ctx, Effects &eff) {
    if (a.term < term_) return report_term(from, eff);
    if (!accept_leader(from, a.term, nullptr, ctx, eff)) return;
    if (a.prev_index > log_.last_index()) {
      request_fetch(from, log_.last_index() + 1, ctx, eff);
      return;
    }
    if (log_.digest_at(a.prev_index) != a.prev_digest) {
      if (a.prev_index <= log_.commit_index())
        evidence(from, a.prev_index, "append conflicts with committed prefix", eff);
      else
        request_fetch(from, log_.commit_index() + 1, ctx, eff);
      return;
    }
    if (!install(from, a.prev_index, a.entries, eff)) return;
    const LogIndex end = a.prev_index + a.entries.size();
    eff.send(from, make_message(Ack{term_, end, log_.digest_at(end), id_, log_.commit_index(), false}));
  }

  void on_heartbeat(NodeId from, const HeartBeat &h, Context &ctx, Effects &eff) {
    if (h.term < term_) return report_term(from, eff);
    if (!accept_leader(from, h.term, h.proof ? &*h.proof : nullptr, ctx, eff)) return;
    const LogIndex last = log_.last_index();
    eff.send(from, make_message(Ack{term_, last, log_.digest_at(last), id_, log_.commit_index(), true}));
    const bool holds_leader_log = h.last_index <= last && log_.digest_at(h.last_index) == h.last_digest;
    if (holds_leader_log) {
      if (h.commit_index > log_.commit_index()) request_fetch(from, h.last_index + 1, ctx, eff);
    } else if (h.last_index > last) {
      request_fetch(from, last + 1, ctx, eff);
    } else {
      request_fetch(from, log_.commit_index() + 1, ctx, eff);
    }
  }

  void on_cert(NodeId from, const Cert &c, Context &ctx, Effects &eff) {
    if (c.cert.term == term_ && leader_ == from && role_ == Role::Follower) refresh_leader(ctx, eff);
    apply_proof(from, CommitProof{c.cert, std::nullopt}, ctx, eff);
  }

  void on_cosig(NodeId from, const CoSig &c, Context &ctx, Effects &eff) {
    if (c.proof.term == term_ && leader_ == from && role_ == Role::Follower) refresh_leader(ctx, eff);
    apply_proof(from, CommitProof{std::nullopt, c.proof}, ctx, eff);
  }

  void apply_proof(NodeId from, const CommitProof &p, Context &ctx, Effects &eff) {
    const NodeId subject = p.cert ? p.cert->issuer : p.cosig ? p.cosig->leader : from;
    if (!commit_proof_valid(p, ctx.crypto)) {
      evidence(subject, p.index(), "invalid commit proof", eff);
      return;
    }
    const LogIndex idx = p.index();
    if (idx <= log_.commit_index()) {
      if (log_.digest_at(idx) != p.digest()) evidence(subject, idx, "proof contradicts committed prefix", eff);
      return;
    }
    if (idx > log_.last_index()) {
      if (leader_ && *leader_ != id_) request_fetch(*leader_, log_.last_index() + 1, ctx, eff);
      return;
    }
    if (log_.digest_at(idx) != p.digest()) {
      if (leader_ && *leader_ != id_) request_fetch(*leader_, log_.commit_index() + 1, ctx, eff);
      return;
    }
    commit_through(idx, eff);
    latest_proof_ = p;
    eff.notes.push_back({Note::Kind::Proof, p.term(), idx, p.digest(), subject, p.cert ? "cert" : "cosig"});
  }

  void on_entries(NodeId from, const EntriesResponse &r, Context &ctx, Effects &eff) {
    if (!accept_leader(from, r.term, r.leadership ? &*r.leadership : nullptr, ctx, eff)) return;
    fetch_hold_until_ = -kInf;
    if (r.prev_index > log_.last_index()) {
      request_fetch(from, log_.last_index() + 1, ctx, eff);
      return;
    }
    if (log_.digest_at(r.prev_index) != r.prev_digest) {
      if (r.prev_index <= log_.commit_index())
        evidence(from, r.prev_index, "fetched entries conflict with committed prefix", eff);
      else
        request_fetch(from, log_.commit_index() + 1, ctx, eff);
      return;
    }
    if (!install(from, r.prev_index, r.entries, eff)) return;
    if (r.proof) apply_proof(from, *r.proof, ctx, eff);
    if (!r.entries.empty() && cfg_.is_tee(from)) {
      const LogIndex end = r.prev_index + r.entries.size();
      eff.send(from, make_message(Ack{term_, end, log_.digest_at(end), id_, log_.commit_index(), false}));
    }
  }

  // -- CoSi fallback ---------------------------------------------------------------
  std::size_t cosi_expected() const {
    std::size_t k = 0;
    for (NodeId p = 0; p < cfg_.n(); ++p)
      if (p != id_ && !excluded_.count(p)) ++k;
    return k;
  }

  void maybe_start_round(Context &ctx, Effects &eff) {
    if (role_ != Role::Leader || tee_ || round_) return;
    const LogIndex last = log_.last_index();
    const LogIndex commit = log_.commit_index();
    if (last <= commit || log_.term_at(last) != term_) return;
    if (cosi_expected() < cfg_.q_rep()) excluded_.clear();
    CosiRound r;
    r.round = next_round_++;
    r.end = last;
    r.end_digest = log_.digest_at(last);
    r.statement = cosig_statement(id_, term_, last, r.end_digest);
    auto msg = make_message(CoSiAnnounce{term_, r.round, commit, log_.digest_at(commit), log_.slice(commit + 1, last)});
    for (NodeId p = 0; p < cfg_.n(); ++p) {
      if (p == id_ || excluded_.count(p)) continue;
      eff.send(p, msg);
      last_sent_[p] = ctx.now;
    }
    round_ = std::move(r);
    eff.cancel(TimerKind::CosiGrace);
    eff.arm(TimerKind::CosiRound, ctx.now + opt_.cosi_round_timeout);
  }

  void on_cosi_commit(NodeId from, const CoSiCommit &c, Context &ctx, Effects &eff) {
    if (role_ != Role::Leader || !round_ || c.term != term_ || c.round != round_->round) return;
    if (round_->challenged || excluded_.count(from)) return;
    const auto &grp = ctx.crypto.group();
    if (c.commitment <= 0 || c.commitment >= grp.p) return;
    round_->commitments.emplace(from, c.commitment);
    cosi_advance(ctx, eff, false);
  }

  void on_cosi_response(NodeId from, const CoSiResponse &r, Context &ctx, Effects &eff) {
    if (role_ != Role::Leader || !round_ || r.term != term_ || r.round != round_->round) return;
    if (!round_->challenged || !round_->participants.test(from)) return;
    if (round_->responses.count(from) || round_->bad.count(from)) return;
    const auto &grp = ctx.crypto.group();
    const bool ok = r.response >= 0 && r.response < grp.q &&
                    ctx.crypto.cosi_verify_partial(keys_->identity_pks[from], round_->commitments.at(from),
                                                   round_->challenge, r.response);
    if (ok) {
      round_->responses.emplace(from, r.response);
    } else {
      round_->bad.insert(from);
      excluded_.insert(from);
      evidence(from, round_->end, "invalid cosi response", eff);
    }
    cosi_advance(ctx, eff, false);
  }

  /// Moves the round forward once everyone expected has answered, or on the
  /// grace timer once a replication quorum has.
  void cosi_advance(Context &ctx, Effects &eff, bool grace_fired) {
    auto &r = *round_;
    if (!r.challenged) {
      const std::size_t got = r.commitments.size();
      if (got >= cosi_expected() || (grace_fired && got >= cfg_.q_rep())) {
        send_challenge(ctx, eff);
      } else if (got >= cfg_.q_rep() && !r.grace_armed) {
        r.grace_armed = true;
        eff.arm(TimerKind::CosiGrace, ctx.now + opt_.cosi_grace);
      }
      return;
    }
    const std::size_t answered = r.responses.size() + r.bad.size();
    const std::size_t expected = r.participants.count();
    if (answered < expected && !grace_fired) {
      if (r.responses.size() >= cfg_.q_rep() && !r.grace_armed) {
        r.grace_armed = true;
        eff.arm(TimerKind::CosiGrace, ctx.now + opt_.cosi_grace);
      }
      return;
    }
    if (r.responses.size() == expected) {
      finish_round(ctx, eff);
    } else {
      // The aggregate needs every participant's response; restart without the
      // ones that misbehaved.
      round_.reset();
      eff.cancel(TimerKind::CosiRound);
      maybe_start_round(ctx, eff);
    }
  }

  void send_challenge(Context &ctx, Effects &eff) {
    auto &r = *round_;
    const auto &grp = ctx.crypto.group();
    r.participants = ParticipationBitmap(cfg_.n());
    std::vector<BigInt> vs;
    for (const auto &[p, v] : r.commitments) {
      r.participants.set(p);
      vs.push_back(v);
    }
    r.aggregate_commitment = crypto::cosi_aggregate_commitments(grp, vs);
    r.challenge = crypto::cosi_challenge(grp, r.aggregate_commitment, r.statement);
    r.challenged = true;
    r.grace_armed = false;
    eff.cancel(TimerKind::CosiGrace);
    auto msg = make_message(CoSiChallenge{term_, r.round, r.aggregate_commitment, r.challenge, r.participants});
    for (const auto &[p, _] : r.commitments) {
      eff.send(p, msg);
      last_sent_[p] = ctx.now;
    }
  }

  void finish_round(Context &ctx, Effects &eff) {
    auto &r = *round_;
    const auto &grp = ctx.crypto.group();
    std::vector<BigInt> rs;
    for (const auto &[_, x] : r.responses) rs.push_back(x);
    CoSigProof proof{id_, term_, r.end, r.end_digest,
                     CollectiveSignature{r.participants, r.aggregate_commitment,
                                         crypto::cosi_aggregate_responses(grp, rs)}};
    round_.reset();
    eff.cancel(TimerKind::CosiRound);
    eff.cancel(TimerKind::CosiGrace);
    if (proof.sig.bitmap.count() < cfg_.q_rep()) {
      maybe_start_round(ctx, eff);
      return;
    }
    commit_through(proof.index, eff);
    latest_proof_ = CommitProof{std::nullopt, proof};
    eff.notes.push_back({Note::Kind::Proof, term_, proof.index, proof.digest, id_, "cosig-issued"});
    broadcast(make_message(CoSig{proof}), ctx, eff);
    maybe_start_round(ctx, eff);
  }

  void on_cosi_announce(NodeId from, const CoSiAnnounce &a, Context &ctx, Effects &eff) {
    if (!accept_leader(from, a.term, nullptr, ctx, eff)) return;
    if (a.prev_index > log_.commit_index()) {
      // Not adjacent to our committed prefix: catch up first, sit this round out.
      request_fetch(from, log_.commit_index() + 1, ctx, eff);
      return;
    }
    if (log_.digest_at(a.prev_index) != a.prev_digest) {
      evidence(from, a.prev_index, "announce conflicts with committed prefix", eff);
      return;
    }
    if (!install(from, a.prev_index, a.entries, eff)) return;
    const LogIndex end = a.prev_index + a.entries.size();
    const Digest d = log_.digest_at(end);
    auto key = std::make_pair(a.term, end);
    if (auto it = cosigned_.find(key); it != cosigned_.end() && it->second != d) return;
    cosigned_[key] = d;
    if (cosi_pending_ && cosi_pending_->term == a.term && cosi_pending_->round >= a.round) return;
    ByteWriter seed;
    seed.str("cosi-secret").bytes(crypto::encode_int(ctx.crypto.group(), keys_->identity[id_].sk));
    seed.u64(a.term).u64(a.round).digest(d);
    auto secret = crypto::cosi_commit(ctx.crypto.group(), seed.data());
    cosi_pending_ = CosiPending{a.term, a.round, end, d, secret.secret, false};
    eff.send(from, make_message(CoSiCommit{a.term, a.round, end, secret.commitment}));
  }

  void on_cosi_challenge(NodeId from, const CoSiChallenge &c, Context &ctx, Effects &eff) {
    if (!cosi_pending_ || leader_ != from || c.term != term_) return;
    auto &p = *cosi_pending_;
    if (p.term != c.term || p.round != c.round || p.responded || !c.participants.test(id_)) return;
    const auto &grp = ctx.crypto.group();
    if (c.aggregate_commitment <= 0 || c.aggregate_commitment >= grp.p) return;
    const BigInt expect = crypto::cosi_challenge(grp, c.aggregate_commitment, cosig_statement(from, p.term, p.end, p.digest));
    if (expect != c.challenge) {
      evidence(from, p.end, "cosi challenge does not match co-signed entry", eff);
      return;
    }
    p.responded = true; // one response per secret
    eff.send(from, make_message(CoSiResponse{c.term, c.round, p.end,
                                             crypto::cosi_respond(grp, p.secret, c.challenge, keys_->identity[id_].sk)}));
  }

  // -- state -----------------------------------------------------------------------
  NodeId id_;
  ClusterConfig cfg_;
  std::shared_ptr<const Keyring> keys_;
  MRaftOptions opt_;
  bool tee_;
  Misbehavior bad_;

  Role role_ = Role::Follower;
  Term term_ = 0;
  ReplicatedLog log_;
  std::optional<NodeId> voted_for_;
  std::optional<NodeId> leader_;
  std::optional<LogPosition> leader_claim_;
  bool timeout_elapsed_ = false;
  unsigned candidacies_ = 0; // consecutive, since a leader was last seen
  std::optional<RequestVote> queued_;

  // candidate
  LogPosition my_claim_;
  std::map<NodeId, VoteRecord> votes_;

  // leader
  std::optional<ProofOfLeadership> proof_;
  std::vector<LogIndex> match_;
  std::vector<bool> acked_;
  std::vector<SimTime> last_sent_;
  std::vector<SimTime> heard_;
  std::map<NodeId, Term> higher_;
  SimTime leader_since_ = 0;
  std::vector<ClientRequest> pending_;
  std::unordered_set<RequestId> pending_ids_;
  std::size_t pending_bytes_ = 0;
  bool flush_armed_ = false;
  std::deque<LogIndex> batch_ends_;
  std::optional<CosiRound> round_;
  std::uint64_t next_round_ = 1;
  std::set<NodeId> excluded_;

  // any role
  std::optional<CommitProof> latest_proof_;
  SimTime fetch_hold_until_ = -kInf;
  LogIndex last_fetch_from_ = 0;
  std::map<std::pair<Term, LogIndex>, Digest> cosigned_;
  std::optional<CosiPending> cosi_pending_;
};

static_assert(Replica<MRaftReplica>);

} // namespace mraft
