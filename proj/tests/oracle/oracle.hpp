#pragma once

// Straight-line reference digests used only to cross-check the library's
// OpenSSL-backed hashing. Slow and unoptimized on purpose.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

std::string sha256_hex(std::string_view data);
std::string blake2b512_hex(std::string_view data);

/// Hamming weight of a lowercase hex string, counted per nibble.
int popcount_hex(std::string_view hex);

/// -p log2 p - (1-p) log2 (1-p), computed with long double.
double binary_entropy(double p);

}  // namespace oracle
