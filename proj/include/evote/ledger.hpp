#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "evote/hashing.hpp"
#include "json.hpp"

namespace evote {

/// Registration block data. The field is named aadhaar_hash whatever the document kind.
struct RegistrationPayload {
  Digest512 aadhaar_hash;
  Digest256 fingerprint_hash;
  std::string photo_rotation_pattern;

  friend bool operator==(const RegistrationPayload&, const RegistrationPayload&) = default;
};

/// Vote block data. Carries the binding hash and the clear choice, never the voter identity.
struct VotePayload {
  Digest256 b_vote;
  std::string candidate_id;
  std::string election_id;
  std::string cast_at;  // ISO-8601 UTC, seconds precision

  friend bool operator==(const VotePayload&, const VotePayload&) = default;
};

using Payload = std::variant<RegistrationPayload, VotePayload>;

inline constexpr std::string_view kGenesisPreviousHash = "0";

struct Block {
  std::uint64_t index = 0;
  Payload payload;
  std::string previous_hash;
  Digest256 block_hash;

  friend bool operator==(const Block&, const Block&) = default;
};

struct Chain {
  std::vector<Block> blocks;

  bool empty() const noexcept { return blocks.empty(); }
  std::size_t size() const noexcept { return blocks.size(); }
  const Block& head() const { return blocks.back(); }

  friend bool operator==(const Chain&, const Chain&) = default;
};

nlohmann::json payload_to_json(const Payload& payload);
/// Strict: exactly the fields of one payload shape, each well-formed.
Payload payload_from_json(const nlohmann::json& j);

/// Keys sorted by code point, no whitespace, UTF-8.
std::string canonical_json(const Payload& payload);

/// sha256(canonical_json(payload) + "|" + previous_hash)
Digest256 compute_block_hash(const Payload& payload, std::string_view previous_hash);

Block make_genesis(Payload payload);

/// The block that would follow the current head (genesis if the chain is empty).
/// Does not modify the chain.
Block next_block(const Chain& chain, Payload payload);

/// Verifies the whole chain, then links a new block onto it.
/// Throws IntegrityError if the chain is empty or invalid.
const Block& append_block(Chain& chain, Payload payload);

/// Throws IntegrityError unless `block` is correctly hashed and links to the chain head.
void check_links_to_head(const Chain& chain, const Block& block);

/// Appends a block already built against the current head, checking only the
/// new block against that head. Used by the committing authority, whose chain
/// is valid by construction. Throws IntegrityError on a stale or mis-hashed block.
const Block& commit_block(Chain& chain, Block block);

enum class ChainFault { kNone, kHashMismatch, kLinkMismatch, kIndexMismatch };

std::string to_string(ChainFault fault);

struct VerificationReport {
  bool ok = true;
  std::optional<std::size_t> first_bad_index;
  ChainFault fault = ChainFault::kNone;
  std::string detail;
};

VerificationReport verify_chain(const Chain& chain);

/// sha256 over the concatenated hex strings, no separators.
Digest256 combine_hashes(std::span<const std::string> hashes);

/// Combined hash of a non-empty valid chain. Throws IntegrityError otherwise.
Digest256 combined_hash(const Chain& chain);

/// {"block_hash","index","payload","previous_hash"}
nlohmann::json block_to_json(const Block& block);
Block block_from_json(const nlohmann::json& j);

}  // namespace evote
