#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evote/errors.hpp"

namespace evote {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) {
  auto v = as_bytes(s);
  return {v.begin(), v.end()};
}

/// True iff every character is in [0-9a-f].
bool is_lower_hex(std::string_view s) noexcept;

std::string to_hex(ByteView data);

/// Decodes an even-length lowercase hex string. Throws ValidationError.
Bytes from_hex(std::string_view hex);

/// A digest carried as a lowercase hex string of exactly Bits/4 characters.
template <std::size_t Bits>
class HexDigest {
 public:
  static constexpr std::size_t kBits = Bits;
  static constexpr std::size_t kHexLength = Bits / 4;

  HexDigest() : hex_(kHexLength, '0') {}

  static HexDigest from_hex(std::string hex) {
    if (hex.size() != kHexLength) {
      throw ValidationError("digest must be " + std::to_string(kHexLength) +
                            " hex characters, got " + std::to_string(hex.size()));
    }
    if (!is_lower_hex(hex)) {
      throw ValidationError("digest contains a non-lowercase-hex character");
    }
    HexDigest d;
    d.hex_ = std::move(hex);
    return d;
  }

  static bool is_valid(std::string_view hex) noexcept {
    return hex.size() == kHexLength && is_lower_hex(hex);
  }

  const std::string& hex() const noexcept { return hex_; }

  friend auto operator<=>(const HexDigest&, const HexDigest&) = default;

 private:
  std::string hex_;
};

using Digest256 = HexDigest<256>;
using Digest512 = HexDigest<512>;

/// Unkeyed BLAKE2b with a 64-byte output.
Digest512 blake2b512(ByteView data);
inline Digest512 blake2b512(std::string_view data) { return blake2b512(as_bytes(data)); }

Digest256 sha256(ByteView data);
inline Digest256 sha256(std::string_view data) { return sha256(as_bytes(data)); }

/// MSB-first expansion of a hex string (any length) into 0/1 values.
std::vector<std::uint8_t> hex_to_bits(std::string_view hex);

/// Inverse of hex_to_bits; the bit count must be a multiple of 4.
std::string bits_to_hex(std::span<const std::uint8_t> bits);

}  // namespace evote
