#include "evote/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

namespace evote {
namespace {

constexpr char kHexChars[] = "0123456789abcdef";

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

template <std::size_t N>
std::array<std::uint8_t, N> evp_digest(const EVP_MD* md, ByteView data) {
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  std::array<std::uint8_t, N> out{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), md, nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != N) {
    throw Error("digest computation failed");
  }
  return out;
}

}  // namespace

bool is_lower_hex(std::string_view s) noexcept {
  for (char c : s) {
    if (nibble(c) < 0) return false;
  }
  return true;
}

std::string to_hex(ByteView data) {
  std::string out(data.size() * 2, '\0');
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[2 * i] = kHexChars[data[i] >> 4];
    out[2 * i + 1] = kHexChars[data[i] & 0x0f];
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw ValidationError("odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ValidationError("malformed hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Digest512 blake2b512(ByteView data) {
  auto raw = evp_digest<64>(EVP_blake2b512(), data);
  return Digest512::from_hex(to_hex(raw));
}

Digest256 sha256(ByteView data) {
  auto raw = evp_digest<32>(EVP_sha256(), data);
  return Digest256::from_hex(to_hex(raw));
}

std::vector<std::uint8_t> hex_to_bits(std::string_view hex) {
  std::vector<std::uint8_t> bits;
  bits.reserve(hex.size() * 4);
  for (char c : hex) {
    int v = nibble(c);
    if (v < 0) throw ValidationError(std::string("malformed hex character '") + c + "'");
    for (int shift = 3; shift >= 0; --shift) {
      bits.push_back(static_cast<std::uint8_t>((v >> shift) & 1));
    }
  }
  return bits;
}

std::string bits_to_hex(std::span<const std::uint8_t> bits) {
  if (bits.size() % 4 != 0) throw ValidationError("bit count must be a multiple of 4");
  std::string out;
  out.reserve(bits.size() / 4);
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    int v = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      if (bits[i + j] > 1) throw ValidationError("bit values must be 0 or 1");
      v = (v << 1) | bits[i + j];
    }
    out.push_back(kHexChars[v]);
  }
  return out;
}

}  // namespace evote
