#pragma once

// Newline-delimited trace. The first line is a header object describing the
// cluster; every following line is one record with a fixed field order.
// The trace digest covers the record lines only.

#include "mraft/encoding.hpp"
#include "mraft/core.hpp"

#include <json.hpp>

#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mraft {

enum class RecordKind { Send, Deliver, Drop, Append, Truncate, Commit, Role, Evidence, Proof, Batch, Tamper, Fault };

inline const char *record_kind_name(RecordKind k) {
  switch (k) {
  case RecordKind::Send: return "send";
  case RecordKind::Deliver: return "deliver";
  case RecordKind::Drop: return "drop";
  case RecordKind::Append: return "append";
  case RecordKind::Truncate: return "truncate";
  case RecordKind::Commit: return "commit";
  case RecordKind::Role: return "role";
  case RecordKind::Evidence: return "evidence";
  case RecordKind::Proof: return "proof";
  case RecordKind::Batch: return "batch";
  case RecordKind::Tamper: return "tamper";
  case RecordKind::Fault: return "fault";
  }
  return "?";
}

inline RecordKind record_kind_from(const std::string &s) {
  for (int k = 0; k <= static_cast<int>(RecordKind::Fault); ++k)
    if (s == record_kind_name(static_cast<RecordKind>(k))) return static_cast<RecordKind>(k);
  throw std::invalid_argument("trace: unknown record kind '" + s + "'");
}

inline constexpr std::int64_t kNoNode = -1;

struct TraceRecord {
  SimTime t = 0;
  RecordKind kind = RecordKind::Send;
  std::int64_t from = kNoNode;
  std::int64_t to = kNoNode;
  std::uint64_t term = 0;
  std::uint64_t index = 0;
  std::optional<Digest> digest;
  std::string note;
};

struct TraceHeader {
  std::string protocol = "mraft";
  std::size_t n = 0;
  std::vector<bool> tee;
  std::vector<NodeId> byzantine;
  std::size_t q_rep = 0;
  std::size_t q_elec = 0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["protocol"] = protocol;
    j["n"] = n;
    j["tee"] = tee;
    j["byzantine"] = byzantine;
    j["q_rep"] = q_rep;
    j["q_elec"] = q_elec;
    j["seed"] = seed;
    return j;
  }

  static TraceHeader from_json(const nlohmann::json &j) {
    TraceHeader h;
    h.protocol = j.at("protocol").get<std::string>();
    h.n = j.at("n").get<std::size_t>();
    h.tee = j.at("tee").get<std::vector<bool>>();
    h.byzantine = j.at("byzantine").get<std::vector<NodeId>>();
    h.q_rep = j.at("q_rep").get<std::size_t>();
    h.q_elec = j.at("q_elec").get<std::size_t>();
    h.seed = j.at("seed").get<std::uint64_t>();
    return h;
  }
};

namespace detail {

inline void append_double(std::string &out, double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, res.ptr);
}

inline void append_json_string(std::string &out, const std::string &s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
    case '"': out += "\\\""; break;
    case '\\': out += "\\\\"; break;
    case '\n': out += "\\n"; break;
    case '\t': out += "\\t"; break;
    default:
      if (static_cast<unsigned char>(c) < 0x20) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "\\u%04x", c);
        out += buf;
      } else {
        out.push_back(c);
      }
    }
  }
  out.push_back('"');
}

inline void append_node(std::string &out, std::int64_t v) {
  if (v == kNoNode)
    out += "null";
  else
    out += std::to_string(v);
}

} // namespace detail

/// {"t","kind","from","to","term","index","digest","note"} in that order.
inline std::string record_line(const TraceRecord &r) {
  std::string s;
  s.reserve(160);
  s += "{\"t\":";
  detail::append_double(s, r.t);
  s += ",\"kind\":\"";
  s += record_kind_name(r.kind);
  s += "\",\"from\":";
  detail::append_node(s, r.from);
  s += ",\"to\":";
  detail::append_node(s, r.to);
  s += ",\"term\":" + std::to_string(r.term);
  s += ",\"index\":" + std::to_string(r.index);
  s += ",\"digest\":";
  if (r.digest) {
    s.push_back('"');
    s += to_hex(*r.digest);
    s.push_back('"');
  } else {
    s += "null";
  }
  s += ",\"note\":";
  detail::append_json_string(s, r.note);
  s.push_back('}');
  return s;
}

inline TraceRecord record_from_line(const std::string &line) {
  auto j = nlohmann::json::parse(line);
  TraceRecord r;
  r.t = j.at("t").get<double>();
  r.kind = record_kind_from(j.at("kind").get<std::string>());
  r.from = j.at("from").is_null() ? kNoNode : j.at("from").get<std::int64_t>();
  r.to = j.at("to").is_null() ? kNoNode : j.at("to").get<std::int64_t>();
  r.term = j.at("term").get<std::uint64_t>();
  r.index = j.at("index").get<std::uint64_t>();
  if (!j.at("digest").is_null()) r.digest = digest_from_hex(j.at("digest").get<std::string>());
  r.note = j.at("note").get<std::string>();
  return r;
}

struct Trace {
  TraceHeader header;
  std::vector<TraceRecord> records;

  Digest digest() const {
    Sha256 h;
    for (const auto &r : records) {
      h.update(record_line(r));
      h.update(std::string_view("\n"));
    }
    return h.finish();
  }

  void write(std::ostream &os) const {
    os << nlohmann::ordered_json{{"header", header.to_json()}}.dump() << '\n';
    for (const auto &r : records) os << record_line(r) << '\n';
  }

  /// Reads a written trace; `line_digest` receives the digest of the record
  /// lines exactly as stored.
  static Trace read(std::istream &is, Digest *line_digest = nullptr) {
    Trace t;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("trace: empty file");
    auto head = nlohmann::json::parse(line);
    if (!head.contains("header")) throw std::invalid_argument("trace: first line is not a header");
    t.header = TraceHeader::from_json(head.at("header"));
    Sha256 h;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      t.records.push_back(record_from_line(line));
      h.update(line);
      h.update(std::string_view("\n"));
    }
    if (line_digest) *line_digest = h.finish();
    return t;
  }
};

} // namespace mraft
