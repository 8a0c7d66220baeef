#pragma once

// The closed set of wire messages for MRaft and the two baselines, their
// canonical encoding (the bytes that get signed) and trace summaries.

#include "mraft/core.hpp"
#include "mraft/crypto.hpp"

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mraft {

using crypto::BigInt;
using crypto::CollectiveSignature;
using crypto::ParticipationBitmap;
using crypto::Signature;

// ---------------------------------------------------------------------------
// Transferable statements

/// A vote binds the candidate's claimed log position, so a leader cannot
/// later present votes gathered under a different claim.
struct VoteRecord {
  Term term = 0;
  NodeId voter = 0;
  NodeId candidate = 0;
  LogPosition claim;
  Signature sig;
};

inline Bytes vote_statement(Term term, NodeId voter, NodeId candidate, LogPosition claim) {
  ByteWriter w;
  w.str("vote").u64(term).u64(voter).u64(candidate).u64(claim.last_term).u64(claim.last_index);
  return w.take();
}

/// Compact proof produced inside a TEE winner's enclave after it checked the votes.
struct EnclaveVoteCert {
  Term term = 0;
  NodeId leader = 0;
  LogPosition claim;
  ParticipationBitmap voters;
  Signature enclave_sig;
};

inline Bytes enclave_vote_statement(Term term, NodeId leader, LogPosition claim, const ParticipationBitmap &voters) {
  ByteWriter w;
  w.str("enclave-votes").u64(term).u64(leader).u64(claim.last_term).u64(claim.last_index).str(voters.to_string());
  return w.take();
}

struct ProofOfLeadership {
  Term term = 0;
  NodeId leader = 0;
  LogPosition claim;
  std::optional<EnclaveVoteCert> enclave; // TEE winner
  std::vector<VoteRecord> votes;          // non-TEE winner
};

struct CommitCertificate {
  NodeId issuer = 0;
  Term term = 0;
  LogIndex index = 0;
  Digest digest{};
  ParticipationBitmap acks;
  Signature enclave_sig;
};

inline Bytes cert_statement(NodeId issuer, Term term, LogIndex index, const Digest &digest,
                            const ParticipationBitmap &acks) {
  ByteWriter w;
  w.str("cert").u64(issuer).u64(term).u64(index).digest(digest).str(acks.to_string());
  return w.take();
}

struct CoSigProof {
  NodeId leader = 0;
  Term term = 0;
  LogIndex index = 0;
  Digest digest{};
  CollectiveSignature sig;
};

/// The message co-signed in a CoSi round. Naming the leader keeps its own
/// key out of every valid bitmap.
inline Bytes cosig_statement(NodeId leader, Term term, LogIndex index, const Digest &digest) {
  ByteWriter w;
  w.str("cosig").u64(leader).u64(term).u64(index).digest(digest);
  return w.take();
}

/// Either attestation that a log prefix is committed.
struct CommitProof {
  std::optional<CommitCertificate> cert;
  std::optional<CoSigProof> cosig;

  LogIndex index() const { return cert ? cert->index : cosig ? cosig->index : 0; }
  Term term() const { return cert ? cert->term : cosig ? cosig->term : 0; }
  Digest digest() const { return cert ? cert->digest : cosig ? cosig->digest : Digest{}; }
};

// ---------------------------------------------------------------------------
// MRaft messages

struct Append {
  Term term = 0;
  LogIndex prev_index = 0;
  Digest prev_digest{};
  std::vector<LogEntry> entries;
  LogIndex leader_commit = 0;
};

struct Ack {
  Term term = 0;
  LogIndex index = 0;
  Digest digest{};
  NodeId signer = 0;
  LogIndex commit = 0;
  bool heartbeat_reply = false;
};

struct Cert {
  CommitCertificate cert;
};

struct HeartBeat {
  Term term = 0;
  LogIndex commit_index = 0;
  LogIndex last_index = 0;
  Digest last_digest{};
  std::optional<ProofOfLeadership> proof;
};

struct RequestVote {
  NodeId candidate = 0;
  Term new_term = 0;
  Term last_log_term = 0;
  LogIndex last_log_index = 0;
  LogPosition claim() const { return {last_log_term, last_log_index}; }
};

struct Vote {
  VoteRecord record;
};

struct CoSiAnnounce {
  Term term = 0;
  std::uint64_t round = 0;
  LogIndex prev_index = 0;
  Digest prev_digest{};
  std::vector<LogEntry> entries;
};

struct CoSiCommit {
  Term term = 0;
  std::uint64_t round = 0;
  LogIndex index = 0; // end of the co-signed run
  BigInt commitment;
};

struct CoSiChallenge {
  Term term = 0;
  std::uint64_t round = 0;
  BigInt aggregate_commitment;
  BigInt challenge;
  ParticipationBitmap participants;
};

struct CoSiResponse {
  Term term = 0;
  std::uint64_t round = 0;
  LogIndex index = 0;
  BigInt response;
};

struct CoSig {
  CoSigProof proof;
};

struct FetchEntries {
  Term term = 0;
  LogIndex from_index = 0;
};

struct EntriesResponse {
  Term term = 0;
  LogIndex prev_index = 0;
  Digest prev_digest{};
  std::vector<LogEntry> entries;
  LogIndex leader_commit = 0;
  std::optional<CommitProof> proof;
  std::optional<ProofOfLeadership> leadership;
};

// ---------------------------------------------------------------------------
// Raft baseline

struct RaftAppend {
  Term term = 0;
  LogIndex prev_index = 0;
  Term prev_term = 0;
  std::vector<LogEntry> entries;
  LogIndex leader_commit = 0;
};

struct RaftAppendReply {
  Term term = 0;
  bool success = false;
  LogIndex match_index = 0;
  bool heartbeat_reply = false;
};

struct RaftCommit {
  Term term = 0;
  LogIndex index = 0;
};

struct RaftRequestVote {
  Term term = 0;
  Term last_log_term = 0;
  LogIndex last_log_index = 0;
};

struct RaftVote {
  Term term = 0;
  bool granted = false;
};

// ---------------------------------------------------------------------------
// PBFT baseline

struct PrePrepare {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest digest{};
  std::vector<LogEntry> entries;
};

struct Prepare {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest digest{};
};

struct PbftCommit {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest digest{};
};

using Message = std::variant<Append, Ack, Cert, HeartBeat, RequestVote, Vote, CoSiAnnounce, CoSiCommit,
                             CoSiChallenge, CoSiResponse, CoSig, FetchEntries, EntriesResponse, RaftAppend,
                             RaftAppendReply, RaftCommit, RaftRequestVote, RaftVote, PrePrepare, Prepare,
                             PbftCommit>;
using MessagePtr = std::shared_ptr<const Message>;

template <class T>
MessagePtr make_message(T body) {
  return std::make_shared<const Message>(std::move(body));
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

inline const char *kind_name(const Message &m) {
  static constexpr const char *kNames[] = {
      "Append",     "Ack",          "Cert",        "HeartBeat",       "RequestVote",  "Vote",
      "CoSiAnnounce", "CoSiCommit", "CoSiChallenge", "CoSiResponse",  "CoSig",        "FetchEntries",
      "EntriesResponse", "RaftAppend", "RaftAppendReply", "RaftCommit", "RaftRequestVote", "RaftVote",
      "PrePrepare", "Prepare",      "PbftCommit"};
  static_assert(std::size(kNames) == std::variant_size_v<Message>);
  return kNames[m.index()];
}

/// Replication messages carry the commit path and are what per-batch
/// complexity counts. Heartbeats, their replies and catch-up traffic are
/// maintenance.
enum class MessageClass { Replication, Election, Maintenance };

inline MessageClass classify(const Message &m) {
  return std::visit(
      Overloaded{
          [](const Ack &a) { return a.heartbeat_reply ? MessageClass::Maintenance : MessageClass::Replication; },
          [](const HeartBeat &) { return MessageClass::Maintenance; },
          [](const FetchEntries &) { return MessageClass::Maintenance; },
          [](const EntriesResponse &) { return MessageClass::Maintenance; },
          [](const RequestVote &) { return MessageClass::Election; },
          [](const Vote &) { return MessageClass::Election; },
          [](const RaftRequestVote &) { return MessageClass::Election; },
          [](const RaftVote &) { return MessageClass::Election; },
          [](const RaftAppend &a) { return a.entries.empty() ? MessageClass::Maintenance : MessageClass::Replication; },
          [](const RaftAppendReply &r) {
            return r.heartbeat_reply ? MessageClass::Maintenance : MessageClass::Replication;
          },
          [](const auto &) { return MessageClass::Replication; },
      },
      m);
}

/// Digest the receiver would hold at the end of an entry run chained on prev.
inline Digest chain_end_digest(const Digest &prev, const std::vector<LogEntry> &entries) {
  Digest d = prev;
  for (const auto &e : entries) d = chain_digest(d, e);
  return d;
}

/// (term, index, digest) slot a message speaks about, for the trace.
struct MessageSummary {
  Term term = 0;
  LogIndex index = 0;
  std::optional<Digest> digest;
};

inline MessageSummary summarize(const Message &m) {
  return std::visit(
      Overloaded{
          [](const Append &a) -> MessageSummary {
            return {a.term, a.prev_index + a.entries.size(), chain_end_digest(a.prev_digest, a.entries)};
          },
          [](const Ack &a) -> MessageSummary { return {a.term, a.index, a.digest}; },
          [](const Cert &c) -> MessageSummary { return {c.cert.term, c.cert.index, c.cert.digest}; },
          [](const HeartBeat &h) -> MessageSummary { return {h.term, h.commit_index, std::nullopt}; },
          [](const RequestVote &r) -> MessageSummary { return {r.new_term, r.last_log_index, std::nullopt}; },
          [](const Vote &v) -> MessageSummary { return {v.record.term, v.record.claim.last_index, std::nullopt}; },
          [](const CoSiAnnounce &a) -> MessageSummary {
            return {a.term, a.prev_index + a.entries.size(), chain_end_digest(a.prev_digest, a.entries)};
          },
          [](const CoSiCommit &c) -> MessageSummary { return {c.term, c.index, std::nullopt}; },
          [](const CoSiChallenge &c) -> MessageSummary { return {c.term, c.round, std::nullopt}; },
          [](const CoSiResponse &r) -> MessageSummary { return {r.term, r.index, std::nullopt}; },
          [](const CoSig &c) -> MessageSummary { return {c.proof.term, c.proof.index, c.proof.digest}; },
          [](const FetchEntries &f) -> MessageSummary { return {f.term, f.from_index, std::nullopt}; },
          [](const EntriesResponse &r) -> MessageSummary {
            return {r.term, r.prev_index + r.entries.size(), chain_end_digest(r.prev_digest, r.entries)};
          },
          [](const RaftAppend &a) -> MessageSummary {
            return {a.term, a.prev_index + a.entries.size(), std::nullopt};
          },
          [](const RaftAppendReply &r) -> MessageSummary { return {r.term, r.match_index, std::nullopt}; },
          [](const RaftCommit &c) -> MessageSummary { return {c.term, c.index, std::nullopt}; },
          [](const RaftRequestVote &r) -> MessageSummary { return {r.term, r.last_log_index, std::nullopt}; },
          [](const RaftVote &v) -> MessageSummary { return {v.term, 0, std::nullopt}; },
          [](const PrePrepare &p) -> MessageSummary { return {p.view, p.seq, p.digest}; },
          [](const Prepare &p) -> MessageSummary { return {p.view, p.seq, p.digest}; },
          [](const PbftCommit &p) -> MessageSummary { return {p.view, p.seq, p.digest}; },
      },
      m);
}

/// Kinds whose (term, index, digest) is a leader statement; a TEE node never
/// issues two of these with the same slot and different digests.
inline bool is_leader_statement(const Message &m) {
  return std::holds_alternative<Append>(m) || std::holds_alternative<Cert>(m) ||
         std::holds_alternative<CoSiAnnounce>(m) || std::holds_alternative<CoSig>(m);
}

// ---------------------------------------------------------------------------
// Canonical encoding

namespace detail {

inline void put_int(ByteWriter &w, const BigInt &x) {
  if (x < 0) throw std::invalid_argument("encode: negative integer");
  Bytes raw((mpz_sizeinbase(x.backend().data(), 2) + 7) / 8);
  std::size_t count = 0;
  if (x != 0) mpz_export(raw.data(), &count, 1, 1, 1, 0, x.backend().data());
  raw.resize(count);
  w.bytes(raw);
}

inline void put_sig(ByteWriter &w, const Signature &s) {
  put_int(w, s.commitment);
  put_int(w, s.response);
}

inline void put_entries(ByteWriter &w, const std::vector<LogEntry> &entries) {
  w.u64(entries.size());
  for (const auto &e : entries) w.u64(e.term).u64(e.index).u64(e.request_id).bytes(e.payload);
}

inline void put_claim(ByteWriter &w, LogPosition p) { w.u64(p.last_term).u64(p.last_index); }

inline void put_vote(ByteWriter &w, const VoteRecord &v) {
  w.u64(v.term).u64(v.voter).u64(v.candidate);
  put_claim(w, v.claim);
  put_sig(w, v.sig);
}

inline void put_proof(ByteWriter &w, const ProofOfLeadership &p) {
  w.u64(p.term).u64(p.leader);
  put_claim(w, p.claim);
  w.u64(p.enclave ? 1 : 0);
  if (p.enclave) {
    w.str(p.enclave->voters.to_string());
    put_sig(w, p.enclave->enclave_sig);
  }
  w.u64(p.votes.size());
  for (const auto &v : p.votes) put_vote(w, v);
}

inline void put_cert(ByteWriter &w, const CommitCertificate &c) {
  w.u64(c.issuer).u64(c.term).u64(c.index).digest(c.digest).str(c.acks.to_string());
  put_sig(w, c.enclave_sig);
}

inline void put_cosig(ByteWriter &w, const CoSigProof &c) {
  w.u64(c.leader).u64(c.term).u64(c.index).digest(c.digest).str(c.sig.bitmap.to_string());
  put_int(w, c.sig.aggregate_commitment);
  put_int(w, c.sig.aggregate_response);
}

} // namespace detail

/// Tag byte (variant index) followed by every field in declaration order.
inline Bytes encode(const Message &m) {
  using namespace detail;
  ByteWriter w;
  w.u64(m.index());
  std::visit(Overloaded{
                 [&](const Append &a) {
                   w.u64(a.term).u64(a.prev_index).digest(a.prev_digest);
                   put_entries(w, a.entries);
                   w.u64(a.leader_commit);
                 },
                 [&](const Ack &a) {
                   w.u64(a.term).u64(a.index).digest(a.digest).u64(a.signer).u64(a.commit).u64(a.heartbeat_reply);
                 },
                 [&](const Cert &c) { put_cert(w, c.cert); },
                 [&](const HeartBeat &h) {
                   w.u64(h.term).u64(h.commit_index).u64(h.last_index).digest(h.last_digest).u64(h.proof ? 1 : 0);
                   if (h.proof) put_proof(w, *h.proof);
                 },
                 [&](const RequestVote &r) { w.u64(r.candidate).u64(r.new_term).u64(r.last_log_term).u64(r.last_log_index); },
                 [&](const Vote &v) { put_vote(w, v.record); },
                 [&](const CoSiAnnounce &a) {
                   w.u64(a.term).u64(a.round).u64(a.prev_index).digest(a.prev_digest);
                   put_entries(w, a.entries);
                 },
                 [&](const CoSiCommit &c) {
                   w.u64(c.term).u64(c.round).u64(c.index);
                   put_int(w, c.commitment);
                 },
                 [&](const CoSiChallenge &c) {
                   w.u64(c.term).u64(c.round);
                   put_int(w, c.aggregate_commitment);
                   put_int(w, c.challenge);
                   w.str(c.participants.to_string());
                 },
                 [&](const CoSiResponse &r) {
                   w.u64(r.term).u64(r.round).u64(r.index);
                   put_int(w, r.response);
                 },
                 [&](const CoSig &c) { put_cosig(w, c.proof); },
                 [&](const FetchEntries &f) { w.u64(f.term).u64(f.from_index); },
                 [&](const EntriesResponse &r) {
                   w.u64(r.term).u64(r.prev_index).digest(r.prev_digest);
                   put_entries(w, r.entries);
                   w.u64(r.leader_commit);
                   w.u64(r.proof && r.proof->cert ? 1 : 0);
                   if (r.proof && r.proof->cert) put_cert(w, *r.proof->cert);
                   w.u64(r.proof && r.proof->cosig ? 1 : 0);
                   if (r.proof && r.proof->cosig) put_cosig(w, *r.proof->cosig);
                   w.u64(r.leadership ? 1 : 0);
                   if (r.leadership) put_proof(w, *r.leadership);
                 },
                 [&](const RaftAppend &a) {
                   w.u64(a.term).u64(a.prev_index).u64(a.prev_term);
                   put_entries(w, a.entries);
                   w.u64(a.leader_commit);
                 },
                 [&](const RaftAppendReply &r) { w.u64(r.term).u64(r.success).u64(r.match_index).u64(r.heartbeat_reply); },
                 [&](const RaftCommit &c) { w.u64(c.term).u64(c.index); },
                 [&](const RaftRequestVote &r) { w.u64(r.term).u64(r.last_log_term).u64(r.last_log_index); },
                 [&](const RaftVote &v) { w.u64(v.term).u64(v.granted); },
                 [&](const PrePrepare &p) {
                   w.u64(p.view).u64(p.seq).digest(p.digest);
                   put_entries(w, p.entries);
                 },
                 [&](const Prepare &p) { w.u64(p.view).u64(p.seq).digest(p.digest); },
                 [&](const PbftCommit &p) { w.u64(p.view).u64(p.seq).digest(p.digest); },
             },
             m);
  return w.take();
}

/// Envelope as it travels through the simulator. `from` is stamped by the
/// network (authenticated channels); `sig` is the sender's identity
/// signature over encode(*body) for non-TEE senders.
struct Envelope {
  std::uint64_t id = 0;
  NodeId from = 0;
  NodeId to = 0;
  MessagePtr body;
  std::optional<Signature> sig;
  bool enclave_origin = false;
};

} // namespace mraft
