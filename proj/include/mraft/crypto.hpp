#pragma once

// Schnorr signatures and CoSi collective signing over a prime-order subgroup
// of Z_p^*. Arithmetic is GMP-backed through Boost.Multiprecision.
//
// Two groups ship: the toy group (p=23, q=11, g=2) whose every value can be
// checked by hand, and a 256-bit safe-prime group used by the simulator.

#include "mraft/encoding.hpp"

#include <boost/multiprecision/gmp.hpp>

#include <cstdint>
#include <iterator>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mraft::crypto {

using BigInt = boost::multiprecision::mpz_int;

inline BigInt powm(const BigInt &base, const BigInt &exp, const BigInt &mod) {
  BigInt r = boost::multiprecision::powm(base, exp, mod);
  return r;
}

struct GroupParams {
  BigInt p;
  BigInt q;
  BigInt g;

  static GroupParams toy() { return {23, 11, 2}; }

  /// p = 2q + 1, both prime; g = 4 generates the quadratic residues (order q).
  static GroupParams sim256() {
    return {BigInt("0x91e04cc81c525dcbafe9ace8874012b97ceec9b312f897dfec9892a15e54b11b"),
            BigInt("0x48f026640e292ee5d7f4d67443a0095cbe7764d9897c4beff64c4950af2a588d"),
            BigInt(4)};
  }

  bool valid() const {
    if (p < 3 || q < 2 || g <= 1 || g >= p) return false;
    if ((p - 1) % q != 0) return false;
    return powm(g, q, p) == 1;
  }

  std::size_t element_bytes() const { return (boost::multiprecision::msb(p) + 8) / 8; }

  bool operator==(const GroupParams &) const = default;
};

/// Fixed-width big-endian encoding of a group element or scalar.
inline Bytes encode_int(const GroupParams &grp, const BigInt &x) {
  Bytes raw((mpz_sizeinbase(x.backend().data(), 2) + 7) / 8);
  std::size_t count = 0;
  if (x != 0) mpz_export(raw.data(), &count, 1, 1, 1, 0, x.backend().data());
  raw.resize(count);
  Bytes out(grp.element_bytes() > raw.size() ? grp.element_bytes() - raw.size() : 0, 0);
  out.insert(out.end(), raw.begin(), raw.end());
  return out;
}

inline BigInt int_from_bytes(std::span<const std::uint8_t> data) {
  BigInt x;
  if (data.empty()) return x;
  mpz_import(x.backend().data(), data.size(), 1, 1, 1, 0, data.data());
  return x;
}

inline std::string int_to_hex(const BigInt &x) {
  std::string s = x.str(0, std::ios_base::hex);
  return s;
}

inline BigInt int_from_hex(const std::string &hex) { return BigInt("0x" + hex); }

struct KeyPair {
  BigInt sk;
  BigInt pk;
};

struct Signature {
  BigInt commitment; // R
  BigInt response;   // s
  bool operator==(const Signature &) const = default;
};

inline KeyPair keypair_from_secret(const GroupParams &grp, const BigInt &sk) {
  return {sk, powm(grp.g, sk, grp.p)};
}

/// Scalar in [1, q-1] from a deterministic 64-bit seed.
inline KeyPair keygen(const GroupParams &grp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BigInt acc = 0;
  for (int i = 0; i < 6; ++i) {
    acc <<= 64;
    acc += rng();
  }
  BigInt sk = acc % (grp.q - 1) + 1;
  return keypair_from_secret(grp, sk);
}

/// Scalar in [1, q-1] derived by hashing arbitrary seed material.
inline BigInt derive_scalar(const GroupParams &grp, std::span<const std::uint8_t> material) {
  Digest h1 = sha256(material);
  ByteWriter w;
  w.digest(h1).str("expand");
  Digest h2 = sha256(w.data());
  Bytes wide(h1.begin(), h1.end());
  wide.insert(wide.end(), h2.begin(), h2.end());
  return int_from_bytes(wide) % (grp.q - 1) + 1;
}

/// c = H(R || message) mod q.
inline BigInt challenge(const GroupParams &grp, const BigInt &commitment,
                        std::span<const std::uint8_t> message) {
  ByteWriter w;
  w.bytes(encode_int(grp, commitment)).bytes(message);
  Digest h = sha256(w.data());
  return int_from_bytes(h) % grp.q;
}

inline Signature sign_with_nonce(const GroupParams &grp, const BigInt &sk,
                                 std::span<const std::uint8_t> message, const BigInt &k,
                                 const std::optional<BigInt> &forced_challenge = std::nullopt) {
  BigInt R = powm(grp.g, k, grp.p);
  BigInt c = forced_challenge ? *forced_challenge : challenge(grp, R, message);
  BigInt s = (k + c * sk) % grp.q;
  return {R, s};
}

/// Deterministic nonce from (sk, message, nonce_seed).
inline BigInt derive_nonce(const GroupParams &grp, const BigInt &sk,
                           std::span<const std::uint8_t> message, std::uint64_t nonce_seed) {
  ByteWriter w;
  w.str("nonce").bytes(encode_int(grp, sk)).u64(nonce_seed).bytes(message);
  return derive_scalar(grp, w.data());
}

inline Signature sign(const GroupParams &grp, const BigInt &sk, std::span<const std::uint8_t> message,
                      std::uint64_t nonce_seed = 0) {
  return sign_with_nonce(grp, sk, message, derive_nonce(grp, sk, message, nonce_seed));
}

/// g^s == R * pk^c (mod p). Mismatches return false.
inline bool verify(const GroupParams &grp, const BigInt &pk, std::span<const std::uint8_t> message,
                   const Signature &sig, const std::optional<BigInt> &forced_challenge = std::nullopt) {
  if (sig.commitment <= 0 || sig.commitment >= grp.p) return false;
  if (sig.response < 0 || sig.response >= grp.q) return false;
  if (pk <= 0 || pk >= grp.p) return false;
  BigInt c = forced_challenge ? *forced_challenge : challenge(grp, sig.commitment, message);
  BigInt lhs = powm(grp.g, sig.response, grp.p);
  BigInt rhs = (sig.commitment * powm(pk, c, grp.p)) % grp.p;
  return lhs == rhs;
}

// ---------------------------------------------------------------------------
// CoSi

class ParticipationBitmap {
public:
  ParticipationBitmap() = default;
  explicit ParticipationBitmap(std::size_t n) : bits_(n, false) {}

  std::size_t size() const { return bits_.size(); }
  void set(std::size_t i, bool v = true) { bits_.at(i) = v; }
  bool test(std::size_t i) const { return i < bits_.size() && bits_[i]; }
  std::size_t count() const {
    std::size_t c = 0;
    for (bool b : bits_) c += b;
    return c;
  }
  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out.push_back(i);
    return out;
  }
  std::string to_string() const {
    std::string s;
    for (bool b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }
  static ParticipationBitmap from_string(const std::string &s) {
    ParticipationBitmap b(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) b.bits_[i] = s[i] == '1';
    return b;
  }

  bool operator==(const ParticipationBitmap &) const = default;

private:
  std::vector<bool> bits_;
};

struct CollectiveSignature {
  ParticipationBitmap bitmap;
  BigInt aggregate_commitment; // V-hat
  BigInt aggregate_response;   // r-hat
  bool operator==(const CollectiveSignature &) const = default;
};

struct CoSiSecret {
  BigInt secret;     // v
  BigInt commitment; // V = g^v
};

inline CoSiSecret cosi_commit_with_secret(const GroupParams &grp, const BigInt &v) {
  return {v, powm(grp.g, v, grp.p)};
}

/// Secret drawn deterministically from the round seed material.
inline CoSiSecret cosi_commit(const GroupParams &grp, std::span<const std::uint8_t> round_seed) {
  return cosi_commit_with_secret(grp, derive_scalar(grp, round_seed));
}

inline BigInt cosi_aggregate_commitments(const GroupParams &grp, std::span<const BigInt> commitments) {
  if (commitments.empty()) throw std::invalid_argument("cosi: empty participant set");
  BigInt acc = 1;
  for (const auto &v : commitments) acc = (acc * v) % grp.p;
  return acc;
}

inline BigInt cosi_challenge(const GroupParams &grp, const BigInt &aggregate_commitment,
                             std::span<const std::uint8_t> message) {
  return challenge(grp, aggregate_commitment, message);
}

inline BigInt cosi_respond(const GroupParams &grp, const BigInt &v, const BigInt &c, const BigInt &sk) {
  return (v + c * sk) % grp.q;
}

inline BigInt cosi_aggregate_responses(const GroupParams &grp, std::span<const BigInt> responses) {
  if (responses.empty()) throw std::invalid_argument("cosi: empty participant set");
  BigInt acc = 0;
  for (const auto &r : responses) acc = (acc + r) % grp.q;
  return acc;
}

/// One participant's contribution: g^r_i == V_i * pk_i^c.
inline bool cosi_verify_partial(const GroupParams &grp, const BigInt &pk, const BigInt &commitment,
                                const BigInt &c, const BigInt &response) {
  return powm(grp.g, response, grp.p) == (commitment * powm(pk, c, grp.p)) % grp.p;
}

inline BigInt aggregate_public_key(const GroupParams &grp, std::span<const BigInt> pks,
                                   const ParticipationBitmap &bitmap) {
  BigInt acc = 1;
  for (std::size_t i = 0; i < pks.size(); ++i)
    if (bitmap.test(i)) acc = (acc * pks[i]) % grp.p;
  return acc;
}

/// g^r-hat == V-hat * (prod_{i in bitmap} pk_i)^c with c = H(V-hat || message).
inline bool cosi_verify(const GroupParams &grp, std::span<const BigInt> pks, const ParticipationBitmap &bitmap,
                        std::span<const std::uint8_t> message, const BigInt &aggregate_commitment,
                        const BigInt &aggregate_response,
                        const std::optional<BigInt> &forced_challenge = std::nullopt) {
  if (bitmap.size() != pks.size() || bitmap.count() == 0) return false;
  if (aggregate_commitment <= 0 || aggregate_commitment >= grp.p) return false;
  BigInt c = forced_challenge ? *forced_challenge : cosi_challenge(grp, aggregate_commitment, message);
  BigInt agg_pk = aggregate_public_key(grp, pks, bitmap);
  return powm(grp.g, aggregate_response, grp.p) == (aggregate_commitment * powm(agg_pk, c, grp.p)) % grp.p;
}

inline bool cosi_verify(const GroupParams &grp, std::span<const BigInt> pks, std::span<const std::uint8_t> message,
                        const CollectiveSignature &sig) {
  return cosi_verify(grp, pks, sig.bitmap, message, sig.aggregate_commitment, sig.aggregate_response);
}

// ---------------------------------------------------------------------------

struct DigestHash {
  std::size_t operator()(const Digest &d) const {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = h << 8 | d[i];
    return h;
  }
};

/// Group plus memo tables for signing and verification. Both operations are
/// pure functions of their inputs, so memoization never changes a result;
/// it only keeps repeated broadcasts from re-exponentiating.
class CryptoContext {
public:
  explicit CryptoContext(GroupParams grp) : group_(std::move(grp)) {}

  const GroupParams &group() const { return group_; }

  Signature sign(const BigInt &sk, std::span<const std::uint8_t> message) const {
    Digest key = cache_key('s', {&sk}, message);
    {
      std::lock_guard lock(mu_);
      if (auto it = signs_.find(key); it != signs_.end()) return it->second;
    }
    Signature sig = crypto::sign(group_, sk, message);
    std::lock_guard lock(mu_);
    if (signs_.size() >= kMaxMemo) signs_.clear();
    signs_.emplace(key, sig);
    return sig;
  }

  bool verify(const BigInt &pk, std::span<const std::uint8_t> message, const Signature &sig) const {
    Digest key = cache_key('v', {&pk, &sig.commitment, &sig.response}, message);
    if (auto hit = lookup(key)) return *hit;
    bool ok = crypto::verify(group_, pk, message, sig);
    store(key, ok);
    return ok;
  }

  bool cosi_verify(std::span<const BigInt> pks, std::span<const std::uint8_t> message,
                   const CollectiveSignature &sig) const {
    ByteWriter w;
    w.str(sig.bitmap.to_string());
    for (const auto &pk : pks) w.bytes(encode_int(group_, pk));
    w.bytes(message);
    Digest key = cache_key('c', {&sig.aggregate_commitment, &sig.aggregate_response}, w.data());
    if (auto hit = lookup(key)) return *hit;
    bool ok = crypto::cosi_verify(group_, pks, message, sig);
    store(key, ok);
    return ok;
  }

  bool cosi_verify_partial(const BigInt &pk, const BigInt &commitment, const BigInt &c,
                           const BigInt &response) const {
    return crypto::cosi_verify_partial(group_, pk, commitment, c, response);
  }

private:
  Digest cache_key(char tag, std::initializer_list<const BigInt *> ints,
                   std::span<const std::uint8_t> message) const {
    ByteWriter w;
    w.str(std::string(1, tag));
    for (const BigInt *x : ints) w.bytes(encode_int(group_, *x));
    w.bytes(message);
    return sha256(w.data());
  }

  std::optional<bool> lookup(const Digest &key) const {
    std::lock_guard lock(mu_);
    if (auto it = verified_.find(key); it != verified_.end()) return it->second;
    return std::nullopt;
  }
  void store(const Digest &key, bool ok) const {
    std::lock_guard lock(mu_);
    if (verified_.size() >= kMaxMemo) verified_.clear();
    verified_.emplace(key, ok);
  }

  static constexpr std::size_t kMaxMemo = 1 << 20;

  GroupParams group_;
  mutable std::mutex mu_;
  mutable std::unordered_map<Digest, Signature, DigestHash> signs_;
  mutable std::unordered_map<Digest, bool, DigestHash> verified_;
};

} // namespace mraft::crypto
