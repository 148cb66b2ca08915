#include "evote/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace evote::analysis {
namespace {

constexpr std::string_view kHexAlphabet = "0123456789abcdef";

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

HashFunction sha256_function() {
  return [](ByteView in) { return from_hex(sha256(in).hex()); };
}

HashFunction blake2b512_function() {
  return [](ByteView in) { return from_hex(blake2b512(in).hex()); };
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

BitCounts bit_counts(std::string_view hex) {
  BitCounts c;
  for (auto bit : hex_to_bits(hex)) (bit ? c.ones : c.zeros)++;
  return c;
}

double bit_entropy(std::string_view hex) {
  const auto c = bit_counts(hex);
  const auto total = c.zeros + c.ones;
  if (total == 0) return 0.0;
  return binary_entropy(static_cast<double>(c.ones) / static_cast<double>(total));
}

double hamming_weight_pct(std::string_view hex) {
  const auto c = bit_counts(hex);
  const auto total = c.zeros + c.ones;
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(c.ones) / static_cast<double>(total);
}

std::map<char, std::uint64_t> char_frequency(std::string_view hex) {
  std::map<char, std::uint64_t> freq;
  for (char c : kHexAlphabet) freq[c] = 0;
  for (char c : hex) {
    auto it = freq.find(c);
    if (it == freq.end()) throw ValidationError(std::string("malformed hex character '") + c + "'");
    ++it->second;
  }
  return freq;
}

double avalanche(const HashFunction& fn, ByteView input, std::size_t trials, std::uint64_t seed) {
  if (input.empty()) throw ValidationError("avalanche needs a non-empty input");
  if (trials == 0) throw ValidationError("avalanche needs at least one trial");

  const std::size_t input_bits = input.size() * 8;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(input_bits);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<std::size_t> any_bit(0, input_bits - 1);

  const Bytes reference = fn(input);
  if (reference.empty()) throw ValidationError("hash function produced no output");
  const double output_bits = static_cast<double>(reference.size() * 8);

  Bytes mutated(input.begin(), input.end());
  double sum = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t bit = t < input_bits ? order[t] : any_bit(rng);
    const auto mask = static_cast<std::uint8_t>(0x80u >> (bit % 8));
    mutated[bit / 8] ^= mask;
    const Bytes out = fn(mutated);
    mutated[bit / 8] ^= mask;
    if (out.size() != reference.size()) throw ValidationError("hash output width changed");
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      flipped += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(out[i] ^ reference[i])));
    }
    sum += static_cast<double>(flipped) / output_bits;
  }
  return sum / static_cast<double>(trials);
}

bool collision_scan(std::span<const Bytes> inputs, const HashFunction& fn) {
  std::set<Bytes> seen_inputs;
  for (const auto& in : inputs) {
    if (!seen_inputs.insert(in).second) {
      throw ValidationError("collision scan inputs must be pairwise distinct");
    }
  }
  std::set<Bytes> outputs;
  bool distinct = true;
  for (const auto& in : inputs) {
    if (!outputs.insert(fn(in)).second) distinct = false;
  }
  return distinct;
}

bool all_distinct(std::span<const std::string> digests) {
  std::set<std::string_view> seen;
  for (const auto& d : digests) {
    if (!seen.insert(d).second) return false;
  }
  return true;
}

Bytes genesis_payload_bytes(const Chain& chain) {
  if (chain.empty()) throw IntegrityError("chain has no genesis block");
  return to_bytes(canonical_json(chain.blocks.front().payload));
}

HashFunction chain_rebuild_function(const Chain& chain) {
  if (chain.empty()) throw IntegrityError("chain has no genesis block");
  std::vector<std::string> tail_payloads;
  for (std::size_t i = 1; i < chain.size(); ++i) {
    tail_payloads.push_back(canonical_json(chain.blocks[i].payload));
  }
  return [tail = std::move(tail_payloads)](ByteView genesis_payload) {
    std::string preimage(genesis_payload.begin(), genesis_payload.end());
    preimage += '|';
    preimage += kGenesisPreviousHash;
    std::string prev = sha256(preimage).hex();
    std::string joined = prev;
    for (const auto& payload : tail) {
      prev = sha256(payload + "|" + prev).hex();
      joined += prev;
    }
    return from_hex(sha256(joined).hex());
  };
}

nlohmann::json HashQualityReport::to_json() const {
  nlohmann::json freq = nlohmann::json::object();
  for (const auto& [c, n] : char_frequency) freq[std::string(1, c)] = n;
  nlohmann::json block_freq = nlohmann::json::object();
  for (const auto& [c, n] : block_hash_char_frequency) block_freq[std::string(1, c)] = n;
  return {
      {"combined_hash", combined_hash},
      {"block_count", block_count},
      {"entropy", entropy},
      {"avalanche_fraction", avalanche_fraction},
      {"avalanche_trials", avalanche_trials},
      {"seed", seed},
      {"collision_free", collision_free},
      {"hamming_weight_pct", hamming_weight_pct},
      {"char_frequency", freq},
      {"block_hash_char_frequency", block_freq},
      {"bit_counts", {{"zeros", bit_counts.zeros}, {"ones", bit_counts.ones}}},
      {"avalanche_discrepancy",
       {{"legacy_figure", kLegacyAvalancheFigure},
        {"reproduced", false},
        {"note",
         "the 0.78% (2/256) figure is not reproduced; flipping one genesis payload bit "
         "changes about half of the combined hash bits"}}},
  };
}

std::string HashQualityReport::char_frequency_csv() const {
  std::ostringstream out;
  out << "char,combined_hash_count,block_hashes_count\n";
  for (const auto& [c, n] : char_frequency) {
    out << c << ',' << n << ',' << block_hash_char_frequency.at(c) << '\n';
  }
  return out.str();
}

std::string HashQualityReport::bit_counts_csv() const {
  std::ostringstream out;
  out << "bit,count\n0," << bit_counts.zeros << "\n1," << bit_counts.ones << '\n';
  return out.str();
}

std::string HashQualityReport::headline() const {
  std::ostringstream out;
  out << "Entropy: " << fixed(entropy, 4) << '\n'
      << "Avalanche Effect: " << fixed(100.0 * avalanche_fraction, 2) << "% ("
      << fixed(avalanche_fraction, 6) << ")\n"
      << "Collision Resistance: " << (collision_free ? "True" : "False") << '\n'
      << "Hamming Weight %: " << fixed(hamming_weight_pct, 2) << "%\n";
  return out.str();
}

HashQualityReport full_report(const Chain& chain, std::size_t trials, std::uint64_t seed) {
  HashQualityReport r;
  const auto combined = combined_hash(chain).hex();
  r.combined_hash = combined;
  r.block_count = chain.size();
  r.entropy = bit_entropy(combined);
  r.hamming_weight_pct = hamming_weight_pct(combined);
  r.char_frequency = char_frequency(combined);
  r.bit_counts = bit_counts(combined);
  r.avalanche_trials = trials;
  r.seed = seed;
  r.avalanche_fraction =
      avalanche(chain_rebuild_function(chain), genesis_payload_bytes(chain), trials, seed);
  std::vector<std::string> block_hashes;
  std::string concatenated;
  for (const auto& b : chain.blocks) {
    block_hashes.push_back(b.block_hash.hex());
    concatenated += b.block_hash.hex();
  }
  r.block_hash_char_frequency = char_frequency(concatenated);
  r.collision_free = all_distinct(block_hashes);
  return r;
}

}  // namespace evote::analysis
