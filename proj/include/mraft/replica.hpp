#pragma once

// Interface between replica state machines and the simulator. A replica is
// a deterministic transition: (state, input, Context) -> (state', Effects).
// Time and randomness only enter through the Context.

#include "mraft/core.hpp"
#include "mraft/crypto.hpp"
#include "mraft/message.hpp"

#include <concepts>
#include <random>
#include <string>
#include <vector>

namespace mraft {

enum class TimerKind { Election, Heartbeat, BatchFlush, CosiRound, CosiGrace, Retry };
inline constexpr std::size_t kTimerKinds = 6;

inline const char *timer_name(TimerKind k) {
  switch (k) {
  case TimerKind::Election: return "election";
  case TimerKind::Heartbeat: return "heartbeat";
  case TimerKind::BatchFlush: return "flush";
  case TimerKind::CosiRound: return "cosi-round";
  case TimerKind::CosiGrace: return "cosi-grace";
  case TimerKind::Retry: return "retry";
  }
  return "?";
}

/// Arms (replacing any pending timer of the same kind) or cancels.
struct TimerRequest {
  TimerKind kind;
  SimTime fire_at = 0;
  bool cancel = false;
};

struct Outbound {
  NodeId to = 0;
  MessagePtr body;
};

struct LogEvent {
  enum class Kind { Append, Truncate, Commit } kind;
  LogIndex index = 0;
  Term term = 0;
  Digest digest{};
  RequestId request_id = 0;
};

enum class Role { Follower, Candidate, Leader };

inline const char *role_name(Role r) {
  switch (r) {
  case Role::Follower: return "follower";
  case Role::Candidate: return "candidate";
  case Role::Leader: return "leader";
  }
  return "?";
}

struct Note {
  enum class Kind { Role, Evidence, Proof, Batch } kind;
  Term term = 0;
  LogIndex index = 0;
  std::optional<Digest> digest;
  NodeId subject = 0; // accused node for evidence, issuer for proofs
  std::string text;
  std::size_t count = 0; // batches committed (Batch notes)
};

enum class ClientStatus { Accepted, Duplicate, NotLeader };

struct ClientOutcome {
  RequestId id = 0;
  ClientStatus status = ClientStatus::NotLeader;
  std::optional<NodeId> leader_hint;
};

struct ClientRequest {
  RequestId id = 0;
  Bytes payload;
};

struct Effects {
  std::vector<Outbound> sends;
  std::vector<TimerRequest> timers;
  std::vector<LogEvent> log;
  std::vector<Note> notes;
  std::vector<ClientOutcome> client;

  void send(NodeId to, MessagePtr body) { sends.push_back({to, std::move(body)}); }
  void arm(TimerKind kind, SimTime at) { timers.push_back({kind, at, false}); }
  void cancel(TimerKind kind) { timers.push_back({kind, 0, true}); }
};

/// Identity keys for every node plus enclave keys for TEE nodes. Fixed at
/// genesis and shared by all replicas (public halves) and the network.
struct Keyring {
  std::vector<crypto::KeyPair> identity;
  std::vector<std::optional<crypto::KeyPair>> enclave;
  std::vector<BigInt> identity_pks;

  static Keyring generate(const crypto::GroupParams &grp, const ClusterConfig &cfg) {
    Keyring k;
    for (NodeId i = 0; i < cfg.n(); ++i) {
      k.identity.push_back(crypto::keygen(grp, 0x1d000000ULL + i));
      k.identity_pks.push_back(k.identity.back().pk);
      if (cfg.is_tee(i))
        k.enclave.push_back(crypto::keygen(grp, 0xe0000000ULL + i));
      else
        k.enclave.push_back(std::nullopt);
    }
    return k;
  }

  const BigInt &enclave_pk(NodeId i) const {
    if (i >= enclave.size() || !enclave[i]) throw std::out_of_range("no enclave key");
    return enclave[i]->pk;
  }
};

struct Context {
  SimTime now = 0;
  std::mt19937_64 &rng;
  const crypto::CryptoContext &crypto;
};

inline double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <class R>
concept Replica = requires(R r, const R cr, Context &ctx, NodeId from, const Message &m, TimerKind k,
                           const ClientRequest &req) {
  { r.start(ctx) } -> std::same_as<Effects>;
  { r.on_message(from, m, ctx) } -> std::same_as<Effects>;
  { r.on_timer(k, ctx) } -> std::same_as<Effects>;
  { r.on_client(req, ctx) } -> std::same_as<Effects>;
  { cr.id() } -> std::convertible_to<NodeId>;
  { cr.role() } -> std::same_as<Role>;
  { cr.term() } -> std::convertible_to<Term>;
  { cr.log() } -> std::same_as<const ReplicatedLog &>;
};

} // namespace mraft
