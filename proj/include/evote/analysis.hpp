#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "evote/hashing.hpp"
#include "evote/ledger.hpp"
#include "json.hpp"

namespace evote::analysis {

/// Maps input bytes to raw output bytes.
using HashFunction = std::function<Bytes(ByteView)>;

HashFunction sha256_function();
HashFunction blake2b512_function();

/// -p*log2(p) - (1-p)*log2(1-p), and 0 at p in {0, 1}. Throws ValidationError outside [0, 1].
double binary_entropy(double p);

struct BitCounts {
  std::uint64_t zeros = 0;
  std::uint64_t ones = 0;

  friend bool operator==(const BitCounts&, const BitCounts&) = default;
};

BitCounts bit_counts(std::string_view hex);

/// Binary Shannon entropy of the digest's bits, in [0, 1].
double bit_entropy(std::string_view hex);

/// 100 * ones / bits.
double hamming_weight_pct(std::string_view hex);

/// Counts of all 16 lowercase hex characters; absent ones map to 0.
std::map<char, std::uint64_t> char_frequency(std::string_view hex);

inline constexpr std::size_t kDefaultAvalancheTrials = 256;

/// Mean fraction of output bits that change when one input bit flips.
/// Flipped bits are drawn without replacement until every input bit has been
/// used, then with replacement. Throws ValidationError on empty input or zero trials.
double avalanche(const HashFunction& fn, ByteView input, std::size_t trials, std::uint64_t seed = 0);

/// True iff the hashes of pairwise-distinct inputs are pairwise distinct.
/// Throws ValidationError if two inputs are equal.
bool collision_scan(std::span<const Bytes> inputs, const HashFunction& fn);

/// True iff no value repeats.
bool all_distinct(std::span<const std::string> digests);

/// Maps replacement genesis payload bytes to the raw combined hash of the
/// chain rebuilt on top of them (every later block re-linked and re-hashed).
HashFunction chain_rebuild_function(const Chain& chain);

/// Bytes of the genesis payload as hashed into block 0.
Bytes genesis_payload_bytes(const Chain& chain);

/// A 0.78% (2/256) avalanche figure is sometimes quoted for this chain layout;
/// it is kept here only so reports can flag that it is not reproduced.
inline constexpr double kLegacyAvalancheFigure = 0.007812;

struct HashQualityReport {
  std::string combined_hash;
  std::size_t block_count = 0;
  double entropy = 0.0;
  double avalanche_fraction = 0.0;
  std::size_t avalanche_trials = 0;
  std::uint64_t seed = 0;
  bool collision_free = true;
  double hamming_weight_pct = 0.0;
  std::map<char, std::uint64_t> char_frequency;
  /// Over all block hashes concatenated (64 characters per block).
  std::map<char, std::uint64_t> block_hash_char_frequency;
  BitCounts bit_counts;

  nlohmann::json to_json() const;
  std::string char_frequency_csv() const;
  std::string bit_counts_csv() const;
  /// "Entropy: ..", "Avalanche Effect: ..%", "Collision Resistance: ..", "Hamming Weight %: ..%"
  std::string headline() const;
};

/// Metrics of the chain's combined hash, pipeline avalanche over the genesis
/// payload, and a collision scan over every block hash.
/// Throws IntegrityError on an empty or invalid chain.
HashQualityReport full_report(const Chain& chain, std::size_t trials = kDefaultAvalancheTrials,
                              std::uint64_t seed = 0);

}  // namespace evote::analysis
