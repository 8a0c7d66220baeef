#pragma once

// Canonical byte encoding and SHA-256 helpers.
//
// Every field is written as a 4-byte big-endian length followed by its
// content. Integers are always 8 bytes, big-endian. A field list therefore
// has exactly one decoding, which is what makes signed material and trace
// digests replayable bit-for-bit.

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mraft {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256: init failed");
  }

  Sha256 &update(std::span<const std::uint8_t> data) {
    EVP_DigestUpdate(ctx_.get(), data.data(), data.size());
    return *this;
  }
  Sha256 &update(std::string_view s) {
    EVP_DigestUpdate(ctx_.get(), s.data(), s.size());
    return *this;
  }

  Digest finish() {
    Digest out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    return out;
  }

private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

inline Digest sha256(std::string_view s) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
}

inline std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

inline Digest digest_from_hex(std::string_view hex) {
  Digest d{};
  if (hex.size() != 64) throw std::invalid_argument("digest hex must be 64 chars");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  for (std::size_t i = 0; i < 32; ++i)
    d[i] = static_cast<std::uint8_t>(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
  return d;
}

class ByteWriter {
public:
  ByteWriter &u64(std::uint64_t v) {
    length(8);
    for (int shift = 56; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
  }

  ByteWriter &bytes(std::span<const std::uint8_t> data) {
    length(data.size());
    buf_.insert(buf_.end(), data.begin(), data.end());
    return *this;
  }

  ByteWriter &str(std::string_view s) {
    return bytes(std::span(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
  }

  ByteWriter &digest(const Digest &d) { return bytes(d); }

  const Bytes &data() const { return buf_; }
  Bytes take() { return std::move(buf_); }

private:
  void length(std::size_t len) {
    auto l = static_cast<std::uint32_t>(len);
    for (int shift = 24; shift >= 0; shift -= 8)
      buf_.push_back(static_cast<std::uint8_t>(l >> shift));
  }

  Bytes buf_;
};

} // namespace mraft
