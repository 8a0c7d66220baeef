#pragma once

// Deterministic discrete-event network. One seeded RNG drives link jitter
// and every replica's randomness; events at equal times run in insertion
// order, so a (scenario, seed) pair always yields the same trace.

#include "mraft/adversary.hpp"
#include "mraft/latency.hpp"
#include "mraft/message.hpp"
#include "mraft/replica.hpp"
#include "mraft/trace.hpp"

#include <array>
#include <functional>
#include <queue>
#include <random>
#include <unordered_map>
#include <vector>

namespace mraft {

struct NetworkOptions {
  LatencyModel latency;
  double jitter_ms = 1.0;       // uniform [0, jitter_ms) added per message
  SimTime gst = 0;              // before this time links may add extra delay
  double pre_gst_extra_ms = 0;  // upper bound of that extra delay
  bool sign_non_tee = true;     // identity-sign messages from non-TEE senders
};

struct TrafficCounters {
  std::uint64_t total = 0;
  std::array<std::uint64_t, 3> by_class{}; // indexed by MessageClass
  std::uint64_t dropped = 0;
  std::uint64_t bad_signature = 0;
};

template <Replica R>
class World {
public:
  struct Hooks {
    std::function<void(NodeId, const LogEvent &, SimTime)> log;
    std::function<void(NodeId, const Note &, SimTime)> note;
    std::function<void(NodeId, const ClientOutcome &, SimTime)> client;
  };

  World(std::vector<R> replicas, std::vector<bool> tee, NetworkOptions net, FaultSchedule faults,
        std::shared_ptr<const Keyring> keys, const crypto::CryptoContext &cc, std::uint64_t seed, TraceHeader header)
      : nodes_(std::move(replicas)), tee_(std::move(tee)), net_(std::move(net)), faults_(std::move(faults)),
        keys_(std::move(keys)), cc_(cc), rng_(seed), crashed_(nodes_.size(), false),
        gens_(nodes_.size()), link_last_(nodes_.size(), std::vector<SimTime>(nodes_.size(), 0)) {
    const std::size_t n = nodes_.size();
    if (tee_.size() != n || net_.latency.size() != n) throw ConfigError("world: size mismatch");
    if (net_.sign_non_tee && !keys_) throw ConfigError("world: signing needs a keyring");
    for (auto &g : gens_) g.fill(0);
    trace_.header = std::move(header);
    for (NodeId i = 0; i < n; ++i) push(event(0, EventType::Start, i));
    for (const auto &c : faults_.crashes) push(event(c.at, EventType::Crash, c.node));
    for (std::size_t i = 0; i < faults_.partitions.size(); ++i) {
      const auto &p = faults_.partitions[i];
      schedule(p.at, [this, i] { fault_record("partition " + std::to_string(i) + " start"); });
      if (p.until) schedule(*p.until, [this, i] { fault_record("partition " + std::to_string(i) + " heal"); });
    }
  }

  World(const World &) = delete;
  World &operator=(const World &) = delete;

  Hooks hooks;

  SimTime now() const { return now_; }
  std::size_t size() const { return nodes_.size(); }
  const R &replica(NodeId i) const { return nodes_.at(i); }
  R &replica_mut(NodeId i) { return nodes_.at(i); }
  bool crashed(NodeId i) const { return crashed_.at(i); }
  bool byzantine(NodeId i) const { return faults_.strategy_of(i).has_value(); }
  const Trace &trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }
  const TrafficCounters &traffic() const { return traffic_; }
  std::mt19937_64 &rng() { return rng_; }

  /// Runs fn at simulated time `at` (clamped to now).
  void schedule(SimTime at, std::function<void()> fn) {
    const auto seq = seq_;
    callbacks_.emplace(seq, std::move(fn));
    push(event(std::max(at, now_), EventType::Callback, 0));
  }

  /// Hands a client request to a node at the current time.
  void submit(NodeId node, ClientRequest req) {
    if (crashed_.at(node)) return;
    Context ctx{now_, rng_, cc_};
    apply(node, nodes_[node].on_client(req, ctx));
  }

  bool step() {
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.at;
    dispatch(ev);
    return true;
  }

  /// Processes every event strictly before `until`, or stops early when
  /// `stop` returns true (checked between events).
  void run_until(SimTime until, const std::function<bool()> &stop = {}) {
    while (!queue_.empty() && queue_.top().at < until) {
      if (stop && stop()) return;
      step();
    }
  }

  bool idle() const { return queue_.empty(); }
  SimTime next_event_time() const { return queue_.empty() ? now_ : queue_.top().at; }

private:
  enum class EventType { Start, Deliver, Timer, Callback, Crash };

  struct Event {
    SimTime at = 0;
    std::uint64_t seq = 0;
    EventType type = EventType::Callback;
    NodeId node = 0;
    TimerKind timer = TimerKind::Election;
    std::uint64_t gen = 0;
    Envelope env;
    MessageSummary summary;
  };

  struct Later {
    bool operator()(const Event &a, const Event &b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  static Event event(SimTime at, EventType type, NodeId node) {
    Event ev;
    ev.at = at;
    ev.type = type;
    ev.node = node;
    return ev;
  }

  void push(Event ev) {
    ev.seq = seq_++;
    queue_.push(std::move(ev));
  }

  void record(TraceRecord r) { trace_.records.push_back(std::move(r)); }

  void fault_record(std::string what) { record({now_, RecordKind::Fault, kNoNode, kNoNode, 0, 0, std::nullopt, std::move(what)}); }

  static std::string msg_note(const Envelope &e) {
    return std::string(kind_name(*e.body)) + " #" + std::to_string(e.id);
  }

  void dispatch(Event &ev) {
    switch (ev.type) {
    case EventType::Callback: {
      auto it = callbacks_.find(ev.seq);
      auto fn = std::move(it->second);
      callbacks_.erase(it);
      fn();
      return;
    }
    case EventType::Crash:
      if (!crashed_[ev.node]) {
        crashed_[ev.node] = true;
        record({now_, RecordKind::Fault, ev.node, kNoNode, nodes_[ev.node].term(), 0, std::nullopt, "crash"});
      }
      return;
    case EventType::Start: {
      if (crashed_[ev.node]) return;
      Context ctx{now_, rng_, cc_};
      apply(ev.node, nodes_[ev.node].start(ctx));
      return;
    }
    case EventType::Timer: {
      if (crashed_[ev.node] || gens_[ev.node][static_cast<std::size_t>(ev.timer)] != ev.gen) return;
      Context ctx{now_, rng_, cc_};
      apply(ev.node, nodes_[ev.node].on_timer(ev.timer, ctx));
      return;
    }
    case EventType::Deliver: deliver(ev); return;
    }
  }

  void drop(const Event &ev, const char *why) {
    ++traffic_.dropped;
    record({now_, RecordKind::Drop, ev.env.from, ev.env.to, ev.summary.term, ev.summary.index, ev.summary.digest,
            msg_note(ev.env) + " " + why});
  }

  void deliver(Event &ev) {
    const Envelope &env = ev.env;
    if (crashed_[env.to]) return drop(ev, "crashed");
    if (faults_.separated(env.from, env.to, now_)) return drop(ev, "partition");
    if (env.sig) {
      if (!cc_.verify(keys_->identity_pks[env.from], encoded(env.body), *env.sig)) {
        ++traffic_.bad_signature;
        return drop(ev, "bad-signature");
      }
    } else if (net_.sign_non_tee && !tee_[env.from]) {
      return drop(ev, "unsigned");
    }
    record({now_, RecordKind::Deliver, env.from, env.to, ev.summary.term, ev.summary.index, ev.summary.digest,
            msg_note(env)});
    if (auto s = faults_.strategy_of(env.to)) {
      auto extra = inbound_reaction(*s, env.to, env.from, *env.body, keys_.get(), cc_);
      if (!extra.empty()) {
        Effects e;
        e.sends = std::move(extra);
        apply(env.to, std::move(e));
      }
    }
    Context ctx{now_, rng_, cc_};
    apply(env.to, nodes_[env.to].on_message(env.from, *env.body, ctx));
  }

  const Bytes &encoded(const MessagePtr &body) {
    if (body.get() != enc_ptr_) {
      enc_ = encode(*body);
      enc_ptr_ = body.get();
      enc_hold_ = body;
    }
    return enc_;
  }

  void apply(NodeId node, Effects eff) {
    for (const auto &n : eff.notes)
      if (n.kind == Note::Kind::Role) note(node, n);
    for (const auto &ev : eff.log) {
      const RecordKind k = ev.kind == LogEvent::Kind::Append     ? RecordKind::Append
                           : ev.kind == LogEvent::Kind::Truncate ? RecordKind::Truncate
                                                                 : RecordKind::Commit;
      const bool has_digest = ev.kind != LogEvent::Kind::Truncate;
      record({now_, k, node, kNoNode, ev.term, ev.index, has_digest ? std::optional<Digest>(ev.digest) : std::nullopt,
              ev.request_id ? "req " + std::to_string(ev.request_id) : std::string()});
      if (hooks.log) hooks.log(node, ev, now_);
    }
    for (const auto &n : eff.notes)
      if (n.kind != Note::Kind::Role) note(node, n);
    for (const auto &c : eff.client)
      if (hooks.client) hooks.client(node, c, now_);
    for (const auto &t : eff.timers) {
      auto &gen = gens_[node][static_cast<std::size_t>(t.kind)];
      ++gen;
      if (!t.cancel) {
        Event ev = event(std::max(t.fire_at, now_), EventType::Timer, node);
        ev.timer = t.kind;
        ev.gen = gen;
        push(std::move(ev));
      }
    }
    if (eff.sends.empty()) return;
    if (auto s = faults_.strategy_of(node)) {
      std::vector<Tamper> log;
      eff.sends = tamper_outbound(*s, std::move(eff.sends), cc_.group(), log);
      for (const auto &t : log) record({now_, RecordKind::Tamper, node, t.to, 0, 0, std::nullopt, t.what});
    }
    const Message *last_body = nullptr;
    MessageSummary summary;
    std::optional<Signature> sig;
    for (auto &o : eff.sends) {
      if (o.to >= nodes_.size() || o.to == node) continue;
      if (o.body.get() != last_body) {
        last_body = o.body.get();
        summary = summarize(*o.body);
        sig.reset();
        if (net_.sign_non_tee && !tee_[node]) sig = cc_.sign(keys_->identity[node].sk, encoded(o.body));
      }
      Envelope env{next_msg_id_++, node, o.to, o.body, sig, static_cast<bool>(tee_[node])};
      ++traffic_.total;
      ++traffic_.by_class[static_cast<std::size_t>(classify(*o.body))];
      record({now_, RecordKind::Send, node, o.to, summary.term, summary.index, summary.digest, msg_note(env)});
      SimTime at = now_ + net_.latency.delay(node, o.to);
      if (net_.jitter_ms > 0) at += uniform(rng_, 0, net_.jitter_ms);
      if (now_ < net_.gst && net_.pre_gst_extra_ms > 0) at += uniform(rng_, 0, net_.pre_gst_extra_ms);
      auto &last = link_last_[node][o.to];
      at = std::max(at, last); // links are FIFO
      last = at;
      Event ev = event(at, EventType::Deliver, o.to);
      ev.env = std::move(env);
      ev.summary = summary;
      push(std::move(ev));
    }
  }

  void note(NodeId node, const Note &n) {
    RecordKind k = RecordKind::Role;
    std::int64_t to = kNoNode;
    std::string text = n.text;
    switch (n.kind) {
    case Note::Kind::Role: k = RecordKind::Role; break;
    case Note::Kind::Evidence: k = RecordKind::Evidence; to = n.subject; break;
    case Note::Kind::Proof: k = RecordKind::Proof; to = n.subject; break;
    case Note::Kind::Batch:
      k = RecordKind::Batch;
      text = "batches " + std::to_string(n.count);
      break;
    }
    record({now_, k, node, to, n.term, n.index, n.digest, std::move(text)});
    if (hooks.note) hooks.note(node, n, now_);
  }

  std::vector<R> nodes_;
  std::vector<bool> tee_;
  NetworkOptions net_;
  FaultSchedule faults_;
  std::shared_ptr<const Keyring> keys_;
  const crypto::CryptoContext &cc_;
  std::mt19937_64 rng_;
  std::vector<bool> crashed_;
  std::vector<std::array<std::uint64_t, kTimerKinds>> gens_;
  std::vector<std::vector<SimTime>> link_last_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<std::uint64_t, std::function<void()>> callbacks_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_msg_id_ = 1;
  SimTime now_ = 0;
  Trace trace_;
  TrafficCounters traffic_;
  const Message *enc_ptr_ = nullptr;
  MessagePtr enc_hold_;
  Bytes enc_;
};

} // namespace mraft
