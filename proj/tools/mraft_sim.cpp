// mraft-sim: run scenarios, compare protocols, re-verify saved traces.
// Exit codes: 0 ok, 1 invariant violation, 2 configuration error.

#include "mraft/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using namespace mraft;

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

/// Resolves a scenario argument: as given, then under MRAFT_SCENARIO_DIR
/// (with or without a .json suffix).
std::string resolve_scenario(const std::string &arg) {
  if (fs::exists(arg)) return arg;
  if (const char *dir = std::getenv("MRAFT_SCENARIO_DIR")) {
    for (const auto &cand : {fs::path(dir) / arg, fs::path(dir) / (arg + ".json")})
      if (fs::exists(cand)) return cand.string();
  }
  throw ConfigError(arg + ": scenario not found");
}

template <class T>
std::vector<T> split_list(const std::string &s, T (*parse)(const std::string &)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse(item));
  if (out.empty()) throw ConfigError("empty list '" + s + "'");
  return out;
}

Protocol parse_protocol(const std::string &s) {
  if (s == "mraft") return Protocol::MRaft;
  if (s == "raft") return Protocol::Raft;
  if (s == "pbft") return Protocol::Pbft;
  throw ConfigError("unknown protocol '" + s + "'");
}

std::size_t parse_size(const std::string &s) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos != s.size()) throw ConfigError("not a non-negative integer: '" + s + "'");
  return v;
}

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot write");
  out << content;
}

void print_violations(const std::vector<Violation> &vs) {
  for (const auto &v : vs) std::cerr << "violation " << v.kind << " at t=" << v.t << ": " << v.detail << '\n';
}

int cmd_run(const std::string &scenario, std::optional<std::uint64_t> seed, const std::string &trace_out,
            const std::string &report_out) {
  Scenario sc = load_scenario(resolve_scenario(scenario));
  if (seed) sc.seed = *seed;
  auto res = run_scenario(sc);
  if (!trace_out.empty()) {
    std::ofstream out(trace_out);
    if (!out) throw ConfigError(trace_out + ": cannot write");
    res.trace.write(out);
  }
  const std::string report = res.report.to_json().dump(2) + "\n";
  if (report_out.empty())
    std::cout << report;
  else
    write_file(report_out, report);
  const auto &r = res.report;
  std::cerr << sc.name << " seed=" << sc.seed << " committed=" << r.committed_requests << "/" << r.requests
            << " batches=" << r.committed_batches << " messages_per_commit=" << r.messages_per_commit
            << " violations=" << r.violations.size() << '\n';
  print_violations(r.violations);
  return r.violations.empty() ? kOk : kViolation;
}

int cmd_compare(const std::string &protocols, const std::string &fs_arg, const std::string &tmpl,
                const std::string &out) {
  const auto ps = split_list<Protocol>(protocols, parse_protocol);
  const auto fvals = split_list<std::size_t>(fs_arg, parse_size);
  Scenario base = load_scenario(resolve_scenario(tmpl));
  const auto rows = compare(ps, fvals, base);
  const std::string csv = compare_csv(rows);
  if (out.empty())
    std::cout << csv;
  else
    write_file(out, csv);
  std::size_t bad = 0;
  for (const auto &r : rows) bad += r.violations;
  return bad ? kViolation : kOk;
}

int cmd_verify(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  Digest lines{};
  Trace t;
  try {
    t = Trace::read(in, &lines);
  } catch (const std::exception &e) {
    throw ConfigError(path + ": " + e.what());
  }
  const auto vs = check_trace(t);
  const Digest rebuilt = t.digest();
  std::cout << "records " << t.records.size() << "\ntrace_digest " << to_hex(lines) << '\n';
  if (rebuilt != lines) {
    std::cerr << "trace lines are not in canonical form\n";
    return kViolation;
  }
  print_violations(vs);
  std::cout << (vs.empty() ? "ok" : "violations found") << '\n';
  return vs.empty() ? kOk : kViolation;
}

int cmd_canned(const std::string &name, std::size_t f, std::uint64_t seed, const std::string &out) {
  const std::string text = scenario_to_json(canned_scenario(name, f, seed)).dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_file(out, text);
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Deterministic simulator for MRaft and its Raft/PBFT baselines"};
  app.require_subcommand(1);

  std::string scenario, trace_out, report_out;
  std::optional<std::uint64_t> seed;
  auto *run = app.add_subcommand("run", "Run one scenario and print its metrics report");
  run->add_option("--scenario", scenario, "Scenario file, or a name under $MRAFT_SCENARIO_DIR")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--trace", trace_out, "Write the NDJSON trace here");
  run->add_option("--report", report_out, "Write the JSON report here instead of stdout");

  std::string protocols = "mraft,raft,pbft", fs_arg = "1,3,6", tmpl, csv_out;
  auto *cmp = app.add_subcommand("compare", "Fault-free message and latency comparison as CSV");
  cmp->add_option("--protocols", protocols, "Comma-separated: mraft, raft, pbft");
  cmp->add_option("--f", fs_arg, "Comma-separated fault thresholds");
  cmp->add_option("--template", tmpl, "Scenario used for network and workload")->required();
  cmp->add_option("--out", csv_out, "CSV output path (stdout when omitted)");

  std::string trace_in;
  auto *ver = app.add_subcommand("verify", "Re-check all invariants on a saved trace");
  ver->add_option("--trace", trace_in, "Trace file")->required();

  std::string canned_name, canned_out;
  std::size_t canned_f = 1;
  std::uint64_t canned_seed = 1;
  auto *can = app.add_subcommand("canned", "Print a built-in adversarial scenario as JSON");
  can->add_option("--name", canned_name, "Scenario name")->required();
  can->add_option("--f", canned_f, "Fault threshold");
  can->add_option("--seed", canned_seed, "Seed");
  can->add_option("--out", canned_out, "Output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(scenario, seed, trace_out, report_out);
    if (*cmp) return cmd_compare(protocols, fs_arg, tmpl, csv_out);
    if (*ver) return cmd_verify(trace_in);
    if (*can) return cmd_canned(canned_name, canned_f, canned_seed, canned_out);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
