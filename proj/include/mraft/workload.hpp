#pragma once

// Logging-benchmark request stream: request i carries id i and, by default,
// the SHA-256 of its id as payload.

#include "mraft/core.hpp"
#include "mraft/replica.hpp"

#include <random>
#include <vector>

namespace mraft {

struct TimedRequest {
  SimTime at = 0;
  ClientRequest request;
};

inline Bytes id_payload(RequestId id) {
  ByteWriter w;
  w.u64(id);
  const Digest d = sha256(w.data());
  return Bytes(d.begin(), d.end());
}

/// Ids 1..count arriving every interval_ms from start_ms. With random_bytes
/// set, payloads are that many seeded random bytes instead.
inline std::vector<TimedRequest> generate_workload(std::size_t count, SimTime start_ms, SimTime interval_ms,
                                                   std::optional<std::size_t> random_bytes, std::uint64_t seed) {
  std::vector<TimedRequest> out;
  out.reserve(count);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < count; ++i) {
    const RequestId id = i + 1;
    Bytes payload;
    if (random_bytes) {
      payload.resize(*random_bytes);
      for (auto &b : payload) b = static_cast<std::uint8_t>(rng());
    } else {
      payload = id_payload(id);
    }
    out.push_back({start_ms + interval_ms * static_cast<double>(i), {id, std::move(payload)}});
  }
  return out;
}

} // namespace mraft
