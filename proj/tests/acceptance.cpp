// Acceptance suite: one PASS/FAIL line per headline property. Exit status is
// nonzero when any line fails.

#include "mraft/checkers.hpp"
#include "mraft/crypto.hpp"
#include "mraft/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

using namespace mraft;

namespace {

const std::set<std::string> kSafetyKinds = {"AGREEMENT", "DURABILITY", "ELECTION SAFETY", "CERT SOUNDNESS"};

int failures = 0;

void verdict(const std::string &name, bool ok, const std::string &detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

/// Runs every job on a small worker pool; results land at their own index.
template <class T>
std::vector<T> parallel_map(std::size_t count, const std::function<T(std::size_t)> &job) {
  std::vector<T> out(count);
  std::atomic<std::size_t> next{0};
  const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) out[i] = job(i);
    });
  for (auto &t : pool) t.join();
  return out;
}

std::size_t count_kinds(const MetricsReport &r, const std::set<std::string> &kinds) {
  return static_cast<std::size_t>(
      std::count_if(r.violations.begin(), r.violations.end(), [&](const Violation &v) { return kinds.count(v.kind); }));
}

Scenario scenario_file(const std::string &name) { return load_scenario(std::string(MRAFT_SCENARIO_DIR) + "/" + name); }

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

// ---------------------------------------------------------------------------

void safety_suite() {
  const auto start = std::chrono::steady_clock::now();
  struct Job {
    std::string name;
    std::size_t f;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto &name : canned_names())
    for (std::size_t f : {1u, 3u}) {
      if (name == "entry_loss_ablation" && f != 1) continue;
      for (std::uint64_t seed = 1; seed <= 200; ++seed) jobs.push_back({name, f, seed});
    }
  const auto bad = parallel_map<std::size_t>(jobs.size(), [&](std::size_t i) {
    return count_kinds(run_scenario(canned_scenario(jobs[i].name, jobs[i].f, jobs[i].seed)).report, kSafetyKinds);
  });
  std::size_t total = 0;
  std::string first;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    total += bad[i];
    if (bad[i] && first.empty())
      first = " first at " + jobs[i].name + " f=" + std::to_string(jobs[i].f) + " seed " + std::to_string(jobs[i].seed);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  verdict("SAFETY SUITE", total == 0 && secs < 300,
          std::to_string(jobs.size()) + " runs, " + std::to_string(total) + " safety violations, " + fmt(secs) + " s" +
              first);
}

void ablation() {
  auto durability_hits = [](std::size_t quorum) {
    const auto hits = parallel_map<std::size_t>(200, [&](std::size_t i) {
      Scenario s = canned_scenario("entry_loss_ablation", 1, i + 1);
      s.mraft.election_quorum = quorum;
      return count_kinds(run_scenario(s).report, {"DURABILITY"}) ? std::size_t{1} : std::size_t{0};
    });
    std::size_t n = 0;
    for (auto h : hits) n += h;
    return n;
  };
  const auto weak = durability_hits(3), strong = durability_hits(4);
  verdict("ABLATION", weak >= 1 && strong == 0,
          "q=3: " + std::to_string(weak) + "/200 seeds lose a committed entry; q=4: " + std::to_string(strong) + "/200");
}

void message_complexity() {
  bool ok = true;
  std::ostringstream detail;
  auto run = [&](Protocol p, std::size_t n, double expect) {
    Scenario s;
    s.protocol = p;
    s.n = n;
    s.latency.kind = "uniform";
    s.workload.count = 200;
    const auto r = run_scenario(s).report;
    const bool good = r.violations.empty() && r.committed_requests == 200 && r.messages_per_commit == expect;
    ok &= good;
    detail << protocol_name(p) << "@" << n << "=" << r.messages_per_commit << (good ? "" : "(want " + fmt(expect) + ")")
           << " ";
  };
  for (std::size_t n : {5u, 11u, 20u}) {
    run(Protocol::MRaft, n, 3.0 * (n - 1));
    run(Protocol::Raft, n, 3.0 * (n - 1));
  }
  for (std::size_t n : {4u, 7u, 13u}) run(Protocol::Pbft, n, double((n - 1) + 2 * n * (n - 1)));

  Scenario tmpl;
  tmpl.latency.kind = "uniform";
  tmpl.workload.count = 100;
  const auto rows = compare({Protocol::MRaft, Protocol::Pbft}, {1, 6}, tmpl);
  auto mpc = [&](Protocol p, std::size_t f) {
    for (const auto &r : rows)
      if (r.protocol == p && r.f == f) return r.messages_per_commit;
    return 0.0;
  };
  const double r1 = mpc(Protocol::Pbft, 1) / mpc(Protocol::MRaft, 1);
  const double r6 = mpc(Protocol::Pbft, 6) / mpc(Protocol::MRaft, 6);
  ok &= r1 >= 2.0 && r6 >= 5.0;
  detail << "| pbft/mraft ratio f=1 " << r1 << ", f=6 " << r6;
  verdict("MESSAGE COMPLEXITY", ok, detail.str());
}

void liveness() {
  bool ok = true;
  std::ostringstream detail;
  for (const char *file : {"table1_n5.json", "table1_n11.json", "table1_n5_crash.json", "table1_n11_crash.json"}) {
    const auto r = run_scenario(scenario_file(file)).report;
    const bool good = r.committed_requests == 1000 && r.end_time <= 60000 && r.violations.empty();
    ok &= good;
    detail << file << " " << r.committed_requests << " by " << r.end_time << " ms; ";
  }

  // Post-crash recovery across seeds: first batch committed by a new leader.
  SimTime worst = 0;
  std::size_t late = 0, runs = 0;
  for (const char *file : {"table1_n5_crash.json", "table1_n11_crash.json"}) {
    const Scenario base = scenario_file(file);
    const auto crash = base.faults.crashes.front();
    const auto gaps = parallel_map<SimTime>(50, [&](std::size_t i) {
      Scenario s = base;
      s.seed = i + 1;
      const auto r = run_scenario(s).report;
      const SimTime from = std::max(crash.at, s.gst);
      for (const auto &b : r.batches)
        if (b.t > crash.at && b.node != crash.node) return b.t - from;
      return SimTime{1e9};
    });
    for (auto g : gaps) {
      ++runs;
      worst = std::max(worst, g);
      late += g > 2000;
    }
  }
  ok &= late == 0;
  detail << "| recovery over " << runs << " crash runs: worst " << worst << " ms, " << late << " over 2000 ms";
  verdict("LIVENESS", ok, detail.str());
}

void tee_preference() {
  const auto winners = parallel_map<int>(500, [](std::size_t i) {
    Scenario s;
    s.name = "tee_preference";
    s.n = 5;
    s.tee = {true, true, true, false, false};
    s.seed = i + 1;
    s.workload.count = 20;
    s.workload.interval_ms = 20;
    s.faults.crashes.push_back({0, 200});
    s.until_ms = 10000;
    const auto r = run_scenario(s).report;
    for (const auto &l : r.leader_history)
      if (!l.bootstrap) return l.tee ? 1 : 0;
    return -1; // no election happened
  });
  const auto tee = std::count(winners.begin(), winners.end(), 1);
  const auto none = std::count(winners.begin(), winners.end(), -1);
  const double share = static_cast<double>(tee) / 500.0;
  verdict("TEE LEADER PREFERENCE", share >= 0.95,
          std::to_string(tee) + "/500 elections won by TEE nodes (" + fmt(100 * share) + "%), " +
              std::to_string(none) + " without a new leader");
}

void crypto_vectors() {
  using namespace crypto;
  const auto toy = GroupParams::toy();
  bool ok = true;
  const Bytes m{'M'};
  const auto sig = sign_with_nonce(toy, 3, m, 5, BigInt(7));
  ok &= sig.commitment == 9 && sig.response == 4 && verify(toy, 8, m, sig, BigInt(7));
  ok &= !verify(toy, 16, m, sig, BigInt(7));

  const auto c1 = cosi_commit_with_secret(toy, 5), c2 = cosi_commit_with_secret(toy, 2);
  const std::vector<BigInt> commits{c1.commitment, c2.commitment};
  const BigInt V = cosi_aggregate_commitments(toy, commits);
  const std::vector<BigInt> responses{cosi_respond(toy, 5, 7, 3), cosi_respond(toy, 2, 7, 4)};
  const BigInt r = cosi_aggregate_responses(toy, responses);
  ParticipationBitmap both(2);
  both.set(0);
  both.set(1);
  const std::vector<BigInt> pks{8, 16};
  ok &= V == 13 && r == 1 && aggregate_public_key(toy, pks, both) == 13 &&
        cosi_verify(toy, pks, both, m, V, r, BigInt(7));

  const auto grp = GroupParams::sim256();
  std::size_t fuzz_bad = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto kp = keygen(grp, seed);
    ByteWriter w;
    w.u64(seed).str("fuzz");
    Bytes msg = w.take();
    const auto s = sign(grp, kp.sk, msg, seed);
    Bytes mutated = msg;
    mutated[seed % mutated.size()] ^= static_cast<std::uint8_t>(1u << (seed % 8));
    Signature forged = s;
    forged.response = (forged.response + 1) % grp.q;
    if (!verify(grp, kp.pk, msg, s) || verify(grp, kp.pk, mutated, s) || verify(grp, kp.pk, msg, forged)) ++fuzz_bad;
  }
  ok &= fuzz_bad == 0;
  verdict("CRYPTO VECTORS", ok,
          "toy R=" + sig.commitment.str() + " s=" + sig.response.str() + ", aggregate V=" + V.str() + " r=" + r.str() +
              ", fuzz failures " + std::to_string(fuzz_bad) + "/1000");
}

void determinism() {
  bool ok = true;
  std::ostringstream detail;
  std::vector<Scenario> cases;
  for (const auto &name : canned_names()) cases.push_back(canned_scenario(name, 1, 17));
  cases.push_back(scenario_file("table1_n5_crash.json"));
  for (const auto &s : cases) {
    const auto a = run_scenario(s), b = run_scenario(s);
    ok &= a.report.trace_digest == b.report.trace_digest;
  }
  detail << cases.size() << " scenarios repeat bit-identically; ";

  const auto path = std::filesystem::temp_directory_path() / "mraft_acceptance_trace.ndjson";
  const auto run = run_scenario(canned_scenario("equivocating_leader", 1, 5));
  {
    std::ofstream out(path);
    run.trace.write(out);
  }
  std::ifstream in(path);
  Digest lines{};
  const Trace back = Trace::read(in, &lines);
  const auto again = check_trace(back);
  std::filesystem::remove(path);
  ok &= lines == run.trace.digest() && again.empty() && back.records.size() == run.trace.records.size();
  detail << "saved trace re-verified with " << again.size() << " violations";
  verdict("DETERMINISM", ok, detail.str());
}

void latency_shape() {
  const auto r = run_scenario(scenario_file("table1_n5.json")).report;
  const double mean = r.leader_latency.mean;
  verdict("LATENCY SHAPE", mean >= 27 && mean <= 90 && r.leader_history.front().node == 0,
          "mean leader-commit latency " + fmt(mean) + " ms over " + std::to_string(r.leader_latency.count) +
              " requests");
}

} // namespace

int main() {
  const std::vector<std::pair<const char *, void (*)()>> checks = {
      {"SAFETY SUITE", safety_suite},
      {"ABLATION", ablation},
      {"MESSAGE COMPLEXITY", message_complexity},
      {"LIVENESS", liveness},
      {"TEE LEADER PREFERENCE", tee_preference},
      {"CRYPTO VECTORS", crypto_vectors},
      {"DETERMINISM", determinism},
      {"LATENCY SHAPE", latency_shape},
  };
  for (const auto &[name, check] : checks) {
    try {
      check();
    } catch (const std::exception &e) {
      verdict(name, false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failing" : std::string("acceptance: all pass"))
            << std::endl;
  return failures ? 1 : 0;
}
